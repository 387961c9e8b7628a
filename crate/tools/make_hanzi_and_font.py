"""Build the sample hanzi pool and the subset CJK font.

near_forms.txt is hand-curated. hanzi.txt is the near-form members followed by
GB2312 level-1 characters in code order, up to 380 entries. The font is Noto
Sans CJK SC (SIL Open Font License 1.1) subset to printable ASCII + hanzi.txt.

usage: python3 tools/make_hanzi_and_font.py /path/to/NotoSansCJKsc-Regular.otf
"""
import subprocess
import sys
from pathlib import Path

root = Path(__file__).resolve().parent.parent
pool = root / "assets/pools/hanzi"
groups = [l.split() for l in (pool / "near_forms.txt").read_text(encoding="utf-8").splitlines() if l.strip()]
members = [c for g in groups for c in g]
assert len(members) == len(set(members)), "character listed in two near-form groups"

chars = list(members)
hi = 0xB0
while len(chars) < 380:
    for lo in range(0xA1, 0xFF):
        try:
            c = bytes([hi, lo]).decode("gb2312")
        except UnicodeDecodeError:
            continue
        if c not in chars:
            chars.append(c)
        if len(chars) >= 380:
            break
    hi += 1
(pool / "hanzi.txt").write_text("\n".join(chars) + "\n", encoding="utf-8")

if len(sys.argv) > 1:
    text = "".join(chars) + "".join(chr(c) for c in range(0x20, 0x7F))
    tmp = root / "target/font_chars.txt"
    tmp.parent.mkdir(exist_ok=True)
    tmp.write_text(text, encoding="utf-8")
    subprocess.check_call([
        sys.executable, "-m", "fontTools.subset", sys.argv[1],
        f"--text-file={tmp}",
        f"--output-file={root / 'assets/fonts/NotoSansCJKsc-Regular-subset.otf'}",
        "--layout-features=", "--no-hinting", "--desubroutinize",
    ])
