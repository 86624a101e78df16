"""Polyline stroke font used by the synthetic line generator.

Glyph coordinates are in x-height units: y = 0 is the baseline, y = 1 the
x-height, ascenders reach 1.6 and descenders -0.6. Each glyph is
``(advance, [polyline, ...])``.

Arabic letters reuse the Latin-like shapes (see ARABIC_SHAPES): the point is
having Arabic code points on the page, not Arabic calligraphy.
"""

import math


def _arc(cx, cy, rx, ry, a0, a1, n=12):
    pts = []
    for i in range(n + 1):
        a = math.radians(a0 + (a1 - a0) * i / n)
        pts.append((cx + rx * math.cos(a), cy + ry * math.sin(a)))
    return pts


def _bowl(cx=0.45, rx=0.35):
    return _arc(cx, 0.5, rx, 0.5, 0, 360, 16)


GLYPHS = {
    "a": (1.0, [_bowl(), [(0.8, 1.0), (0.8, 0.0)]]),
    "b": (1.0, [[(0.1, 1.6), (0.1, 0.0)], _bowl(0.45)]),
    "c": (0.9, [_arc(0.45, 0.5, 0.35, 0.5, 45, 315)]),
    "d": (1.0, [_bowl(), [(0.8, 1.6), (0.8, 0.0)]]),
    "e": (0.9, [[(0.1, 0.5), (0.8, 0.5)] + _arc(0.45, 0.5, 0.35, 0.5, 0, 310)]),
    "f": (0.7, [_arc(0.5, 1.3, 0.2, 0.3, 0, 180, 6) + [(0.3, 0.0)], [(0.1, 1.0), (0.6, 1.0)]]),
    "g": (1.0, [_bowl(), [(0.8, 1.0), (0.8, -0.4)] + _arc(0.45, -0.4, 0.35, 0.2, 0, -180, 6)]),
    "h": (1.0, [[(0.1, 1.6), (0.1, 0.0)], [(0.1, 0.6)] + _arc(0.45, 0.6, 0.35, 0.4, 180, 0, 6) + [(0.8, 0.0)]]),
    "i": (0.4, [[(0.2, 1.0), (0.2, 0.0)], [(0.2, 1.35), (0.2, 1.45)]]),
    "k": (0.9, [[(0.1, 1.6), (0.1, 0.0)], [(0.75, 1.0), (0.1, 0.4), (0.75, 0.0)]]),
    "l": (0.4, [[(0.2, 1.6), (0.2, 0.0)]]),
    "m": (1.4, [[(0.1, 1.0), (0.1, 0.0)], [(0.1, 0.6)] + _arc(0.4, 0.6, 0.3, 0.4, 180, 0, 6) + [(0.7, 0.0)],
                [(0.7, 0.6)] + _arc(1.0, 0.6, 0.3, 0.4, 180, 0, 6) + [(1.3, 0.0)]]),
    "n": (1.0, [[(0.1, 1.0), (0.1, 0.0)], [(0.1, 0.6)] + _arc(0.45, 0.6, 0.35, 0.4, 180, 0, 6) + [(0.8, 0.0)]]),
    "o": (1.0, [_bowl()]),
    "p": (1.0, [[(0.1, 1.0), (0.1, -0.6)], _bowl(0.45)]),
    "q": (1.0, [_bowl(), [(0.8, 1.0), (0.8, -0.6), (1.0, -0.4)]]),
    "r": (0.7, [[(0.1, 1.0), (0.1, 0.0)], [(0.1, 0.6)] + _arc(0.4, 0.6, 0.3, 0.4, 180, 60, 5)]),
    "s": (0.8, [_arc(0.4, 0.75, 0.3, 0.25, 10, 270, 8) + _arc(0.4, 0.25, 0.3, 0.25, 90, -170, 8)]),
    "t": (0.6, [[(0.25, 1.4), (0.25, 0.1), (0.5, 0.0)], [(0.0, 1.0), (0.5, 1.0)]]),
    "u": (1.0, [[(0.1, 1.0), (0.1, 0.4)] + _arc(0.45, 0.4, 0.35, 0.4, 180, 360, 6), [(0.8, 1.0), (0.8, 0.0)]]),
    "v": (0.9, [[(0.05, 1.0), (0.45, 0.0), (0.85, 1.0)]]),
    "w": (1.3, [[(0.05, 1.0), (0.35, 0.0), (0.65, 0.8), (0.95, 0.0), (1.25, 1.0)]]),
    "x": (0.9, [[(0.1, 1.0), (0.8, 0.0)], [(0.1, 0.0), (0.8, 1.0)]]),
    "y": (0.9, [[(0.1, 1.0), (0.45, 0.0)], [(0.8, 1.0), (0.3, -0.6)]]),
    "z": (0.9, [[(0.1, 1.0), (0.8, 1.0), (0.1, 0.0), (0.8, 0.0)]]),
    "0": (1.0, [_arc(0.45, 0.7, 0.35, 0.7, 0, 360, 16)]),
    "1": (0.6, [[(0.1, 1.1), (0.35, 1.4), (0.35, 0.0)]]),
    "2": (0.9, [_arc(0.45, 1.05, 0.35, 0.35, 160, -30, 8) + [(0.1, 0.0), (0.85, 0.0)]]),
    "3": (0.9, [_arc(0.4, 1.05, 0.35, 0.35, 150, -90, 8) + _arc(0.4, 0.35, 0.4, 0.35, 90, -150, 8)]),
    "4": (0.9, [[(0.6, 0.0), (0.6, 1.4), (0.05, 0.4), (0.85, 0.4)]]),
    "5": (0.9, [[(0.8, 1.4), (0.15, 1.4), (0.1, 0.75)] + _arc(0.42, 0.45, 0.38, 0.45, 120, -150, 10)]),
    "6": (0.9, [_arc(0.45, 1.0, 0.35, 0.4, 60, 180, 5) + _arc(0.45, 0.4, 0.35, 0.4, 180, 540, 14)]),
    "7": (0.9, [[(0.1, 1.4), (0.85, 1.4), (0.3, 0.0)]]),
    "8": (0.9, [_arc(0.45, 1.05, 0.3, 0.35, -90, 270, 12), _arc(0.45, 0.35, 0.38, 0.35, 90, 450, 12)]),
    "9": (0.9, [_arc(0.45, 1.0, 0.35, 0.4, 0, 360, 14) + [(0.8, 0.0)]]),
    ".": (0.4, [[(0.2, 0.0), (0.2, 0.08)]]),
    ",": (0.4, [[(0.25, 0.08), (0.1, -0.3)]]),
    "-": (0.7, [[(0.1, 0.5), (0.6, 0.5)]]),
    " ": (0.8, []),
}

# Arabic letters drawn with Latin-like stroke shapes
ARABIC_SHAPES = {
    "ا": "l",  # alef
    "ب": "b",  # beh
    "ت": "t",  # teh
    "ج": "g",  # jeem
    "ح": "h",  # hah
    "د": "d",  # dal
    "ر": "r",  # reh
    "ز": "z",  # zain
    "س": "s",  # seen
    "ص": "c",  # sad
    "ع": "e",  # ain
    "ف": "f",  # feh
    "ق": "q",  # qaf
    "ك": "k",  # kaf
    "م": "m",  # meem
    "ن": "n",  # noon
    "و": "o",  # waw
    "ي": "y",  # yeh
}

for _ch, _shape in ARABIC_SHAPES.items():
    GLYPHS[_ch] = GLYPHS[_shape]

LATIN = "abcdefghiklmnopqrstuvwxyz"
DIGITS = "0123456789"
ARABIC = "".join(ARABIC_SHAPES)
