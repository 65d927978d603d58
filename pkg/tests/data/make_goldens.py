"""Regenerate pi1_golden.json. Run from the repository root:

    python3 tests/data/make_goldens.py
"""

import json
import pathlib

from dcqtk import qmath
from dcqtk.enumerate import cantor_decode, pi1

SELECTED = [392057, 5720656, 200450256]

rows = []
for s in list(range(200)) + SELECTED:
    rho = pi1(s)
    rep = pi1(s, "classical", 12)
    rows.append(
        {
            "s": s,
            "decode": list(cantor_decode(s)),
            "quantum": json.loads(qmath.state_to_json(rho)),
            "classical": rep.text,
        }
    )
path = pathlib.Path(__file__).with_name("pi1_golden.json")
path.write_text(json.dumps(rows, indent=1) + "\n")
