#!/usr/bin/env python3
"""Regenerates the canonical normalization tables in core/src/nfc_data.inc.

Run from the repository root:

    python3 scripts/gen_nfc_data.py

Also refreshes tests/data/nfc_fixtures.txt, a corpus of input/expected pairs
produced with Python's unicodedata so the C++ implementation can be checked
against an independent reference.  Both outputs are committed; this script
only needs to run again when bumping the Unicode version.
"""

import random
import sys
import unicodedata

HANGUL_S_BASE = 0xAC00
HANGUL_S_COUNT = 11172

MAX_CP = 0x110000


def is_hangul_syllable(cp: int) -> bool:
    return HANGUL_S_BASE <= cp < HANGUL_S_BASE + HANGUL_S_COUNT


def gather_tables():
    """Returns (decomp, ccc, comp) dicts keyed by codepoint / pair."""
    decomp = {}  # cp -> list of cps (full canonical decomposition, NFD order)
    ccc = {}  # cp -> canonical combining class (nonzero only)
    comp = {}  # (first, second) -> composed cp (primary composites)
    for cp in range(MAX_CP):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        ch = chr(cp)
        k = unicodedata.combining(ch)
        if k:
            ccc[cp] = k
        # Hangul syllables decompose and compose algorithmically; keep them
        # out of the tables.
        if is_hangul_syllable(cp):
            continue
        nfd = unicodedata.normalize("NFD", ch)
        if nfd != ch:
            decomp[cp] = [ord(c) for c in nfd]
        raw = unicodedata.decomposition(ch)
        if raw and not raw.startswith("<"):
            parts = [int(p, 16) for p in raw.split()]
            if len(parts) == 2:
                # A two-codepoint canonical decomposition recomposes under
                # NFC exactly when the character is not composition-excluded.
                if unicodedata.normalize("NFC", nfd) == ch:
                    comp[(parts[0], parts[1])] = cp
    return decomp, ccc, comp


def emit_inc(path: str, decomp, ccc, comp):
    lines = []
    lines.append("// Generated by scripts/gen_nfc_data.py -- do not edit.")
    lines.append("// Unicode data version: %s" % unicodedata.unidata_version)
    lines.append("")
    max_len = max(len(v) for v in decomp.values())
    lines.append("struct DecompEntry {")
    lines.append("  char32_t cp;")
    lines.append("  uint8_t len;")
    lines.append("  char32_t out[%d];" % max_len)
    lines.append("};")
    lines.append("")
    lines.append("// Full canonical decompositions (already in canonical order),")
    lines.append("// sorted by codepoint.  Hangul syllables are handled in code.")
    lines.append("inline constexpr DecompEntry kDecomp[] = {")
    for cp in sorted(decomp):
        out = decomp[cp]
        padded = out + [0] * (max_len - len(out))
        cps = ", ".join("0x%X" % c for c in padded)
        lines.append("    {0x%X, %d, {%s}}," % (cp, len(out), cps))
    lines.append("};")
    lines.append("")
    lines.append("struct CccEntry {")
    lines.append("  char32_t cp;")
    lines.append("  uint8_t ccc;")
    lines.append("};")
    lines.append("")
    lines.append("// Nonzero canonical combining classes, sorted by codepoint.")
    lines.append("inline constexpr CccEntry kCcc[] = {")
    for cp in sorted(ccc):
        lines.append("    {0x%X, %d}," % (cp, ccc[cp]))
    lines.append("};")
    lines.append("")
    lines.append("// Primary composites keyed on (first << 32) | second, sorted by")
    lines.append("// key.  Composition exclusions are already filtered out; Hangul")
    lines.append("// is handled in code.")
    lines.append("struct CompEntry {")
    lines.append("  uint64_t key;")
    lines.append("  char32_t composed;")
    lines.append("};")
    lines.append("")
    lines.append("inline constexpr CompEntry kComp[] = {")
    for (a, b) in sorted(comp):
        key = (a << 32) | b
        lines.append("    {0x%XULL, 0x%X}," % (key, comp[(a, b)]))
    lines.append("};")
    lines.append("")
    with open(path, "w") as f:
        f.write("\n".join(lines))
    print(
        "wrote %s: %d decompositions, %d ccc entries, %d composition pairs"
        % (path, len(decomp), len(ccc), len(comp))
    )


def interesting_codepoints(decomp, ccc, comp):
    cps = set()
    cps.update(decomp)
    cps.update(ccc)
    for (a, b), c in comp.items():
        cps.update((a, b, c))
    # Hangul coverage: syllables with and without trailing consonant, plus
    # bare jamo that should compose.
    cps.update([0xAC00, 0xAC01, 0xD7A3, 0xB098, 0x1100, 0x1161, 0x11A8, 0x1112, 0x1175, 0x11C2])
    cps.update([0x0041, 0x007A, 0x0020, 0x00E9, 0x212B, 0x1E0B, 0x0F77])
    return sorted(cps)


def make_fixtures(decomp, ccc, comp):
    """Returns a list of (input, expected_nfc) unicode string pairs."""
    cases = []

    def add(s):
        cases.append((s, unicodedata.normalize("NFC", s)))

    # Hand-picked shapes: singletons, composed/decomposed pairs, reordering,
    # blocked composition, Hangul, and strings that are already NFC.
    add("")
    add("plain ascii text, no marks at all")
    add("café")
    add("café")
    add("é́́")
    add("Å")  # angstrom sign -> A with ring
    add("ą́")  # ogonek (ccc 202) + acute (ccc 230), already ordered
    add("ą́")  # acute before ogonek: must reorder then compose
    add("a̅́")  # ccc 230 then 230: blocked, stays decomposed
    add("q̣̇")  # dot above then dot below: reorders
    add("ḍ̇")
    add("Ǻ")  # A + ring + acute -> U+01FA
    add("가")  # L + V -> hangul LV
    add("각")  # L + V + T -> LVT
    add("각")  # LV + T -> LVT
    add("각")  # already-composed LVT survives
    add("ᄀᆨ")  # L + T alone must not compose
    add("ཱཱི")  # Tibetan vowels with odd ccc values
    add("אָּ")  # Hebrew points (ccc 18, 21) need reordering? (21 > 18)
    add("אָּ")
    add("й")  # Cyrillic и + breve -> й
    add("ᾂ")  # Greek alpha with three marks -> single cp
    add("ᾂ and text after")
    add("mixed ÅÅÅ in one string")
    add("̈́")  # dialytika tonos: singleton-ish decomposition to 3 marks
    add("ẍ́y")

    # Every two-codepoint primary composite, fed in decomposed form.
    for (a, b), c in sorted(comp.items()):
        add(chr(a) + chr(b))
    # Every singleton decomposition must map away from itself.
    for cp, out in sorted(decomp.items()):
        if len(out) == 1:
            add(chr(cp))

    # Random stress strings over a mixed alphabet, fixed seed so the file is
    # reproducible.
    rng = random.Random(20240817)
    pool = interesting_codepoints(decomp, ccc, comp)
    letters = [0x61, 0x62, 0x7A, 0x20, 0x00E9, 0x4E2D, 0x1F600]
    for _ in range(400):
        n = rng.randrange(1, 24)
        s = "".join(
            chr(rng.choice(pool)) if rng.random() < 0.6 else chr(rng.choice(letters))
            for _ in range(n)
        )
        add(s)
    return cases


def emit_fixtures(path: str, cases):
    with open(path, "w") as f:
        f.write("# input_hex <TAB> expected_nfc_hex (UTF-8 bytes, lowercase hex)\n")
        f.write("# generated by scripts/gen_nfc_data.py\n")
        for src, want in cases:
            f.write("%s\t%s\n" % (src.encode("utf-8").hex(), want.encode("utf-8").hex()))
    print("wrote %s: %d cases" % (path, len(cases)))


def main():
    decomp, ccc, comp = gather_tables()
    emit_inc("core/src/nfc_data.inc", decomp, ccc, comp)
    emit_fixtures("tests/data/nfc_fixtures.txt", make_fixtures(decomp, ccc, comp))
    return 0


if __name__ == "__main__":
    sys.exit(main())
