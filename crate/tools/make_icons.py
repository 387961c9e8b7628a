"""Rasterize the sample icon pool from DejaVu Sans symbol glyphs.

Writes one 96x96 RGBA PNG per icon plus icons.tsv (id, filename, monochrome).
Roughly every third icon is rendered with a two-color gradient fill and
flagged non-monochrome.
"""
import sys
import unicodedata
from pathlib import Path

from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFont

FONT = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"
SIZE = 96
RANGES = [(0x2600, 0x2700), (0x2700, 0x27C0), (0x2190, 0x2200), (0x25A0, 0x2600)]
WANT = 120

out = Path(sys.argv[1] if len(sys.argv) > 1 else "assets/pools/icons")
out.mkdir(parents=True, exist_ok=True)
cmap = TTFont(FONT).getBestCmap()
font = ImageFont.truetype(FONT, int(SIZE * 0.8))

picked = []
seen_masks = set()
for lo, hi in RANGES:
    for cp in range(lo, hi):
        if cp not in cmap:
            continue
        try:
            name = unicodedata.name(chr(cp))
        except ValueError:
            continue
        mask = Image.new("L", (SIZE, SIZE), 0)
        d = ImageDraw.Draw(mask)
        bbox = d.textbbox((0, 0), chr(cp), font=font)
        w, h = bbox[2] - bbox[0], bbox[3] - bbox[1]
        if w < SIZE * 0.3 or h < SIZE * 0.3:
            continue
        d.text(((SIZE - w) / 2 - bbox[0], (SIZE - h) / 2 - bbox[1]), chr(cp), font=font, fill=255)
        key = mask.resize((12, 12)).tobytes()
        if key in seen_masks:
            continue
        seen_masks.add(key)
        picked.append((cp, name, mask))
        if len(picked) >= WANT:
            break
    if len(picked) >= WANT:
        break

palette = [((220, 40, 40), (250, 200, 0)), ((30, 90, 220), (40, 200, 160)),
           ((150, 30, 200), (250, 90, 150)), ((10, 140, 60), (200, 220, 30))]
rows = []
for i, (cp, name, mask) in enumerate(picked):
    ident = name.lower().replace(" ", "-")
    mono = i % 3 != 2
    img = Image.new("RGBA", (SIZE, SIZE), (0, 0, 0, 0))
    if mono:
        fill = Image.new("RGBA", (SIZE, SIZE), (0, 0, 0, 255))
    else:
        a, b = palette[i % len(palette)]
        fill = Image.new("RGBA", (SIZE, SIZE))
        px = fill.load()
        for y in range(SIZE):
            t = y / (SIZE - 1)
            c = tuple(round(a[k] * (1 - t) + b[k] * t) for k in range(3))
            for x in range(SIZE):
                px[x, y] = c + (255,)
    img.paste(fill, (0, 0), mask)
    fname = f"{ident}.png"
    img.save(out / fname, optimize=True)
    rows.append(f"{ident}\t{fname}\t{'1' if mono else '0'}")

(out / "icons.tsv").write_text("id\tfilename\tmonochrome\n" + "\n".join(rows) + "\n")
print(len(rows), "icons")
