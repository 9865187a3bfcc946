#pragma once

#include <stdexcept>
#include <string>

namespace gdr {

/// Malformed or invariant-violating input data (documents, dialogues,
/// embeddings, run files). Messages name the offending record.
class IngestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An index or corpus could not be built from otherwise valid input.
class BuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vector length disagrees with an index dimension.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation was asked for on an empty or inconsistent input set.
class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gdr
