#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from Python's unicodedata.

The tokenizers mirror Python string semantics (str.split, str.lower,
re's \\w), so the tables are taken from the running interpreter.
"""
import sys
import unicodedata

MAX_CP = 0x110000


def ranges(pred):
    out, start = [], None
    for cp in range(MAX_CP):
        hit = pred(cp)
        if hit and start is None:
            start = cp
        elif not hit and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, MAX_CP - 1))
    return out


def is_surrogate(cp):
    return 0xD800 <= cp <= 0xDFFF


def emit_ranges(name, rs, f):
    f.write(f"inline constexpr CodepointRange {name}[] = {{\n")
    for a, b in rs:
        f.write(f"    {{0x{a:04X}, 0x{b:04X}}},\n")
    f.write("};\n\n")


def cstr(s):
    return "".join(f"\\x{b:02x}" for b in s.encode("utf-8"))


def main(path):
    space = ranges(lambda cp: not is_surrogate(cp) and chr(cp).isspace())
    punct = ranges(lambda cp: unicodedata.category(chr(cp)).startswith("P"))
    word = ranges(lambda cp: not is_surrogate(cp)
                  and (chr(cp).isalnum() or cp == 0x5F))
    lower = [(cp, chr(cp).lower()) for cp in range(MAX_CP)
             if not is_surrogate(cp) and chr(cp).lower() != chr(cp)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("// Generated by tools/scripts/gen_unicode_tables.py "
                f"(Unicode {unicodedata.unidata_version}). Do not edit.\n\n")
        emit_ranges("kWhitespace", space, f)
        emit_ranges("kPunctuation", punct, f)
        emit_ranges("kWordChar", word, f)
        f.write("inline constexpr LowerMapping kLower[] = {\n")
        for cp, s in lower:
            f.write(f"    {{0x{cp:04X}, \"{cstr(s)}\"}},\n")
        f.write("};\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/unicode_tables.inc")
