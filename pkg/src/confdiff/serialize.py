"""JSON emission with every float written at 17 significant digits."""
import json

import numpy as np

from .datasets import fmt_float

# floats travel through json.dumps as tagged strings, then get unquoted
_MARK = "@f17:"


def _tag(obj):
    if isinstance(obj, dict):
        return {str(k): _tag(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _tag(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _MARK + fmt_float(obj)
    return obj


def dumps(obj) -> str:
    text = json.dumps(_tag(obj), indent=2, sort_keys=True)
    quoted = '"' + _MARK
    out = []
    i = 0
    while (j := text.find(quoted, i)) >= 0:
        k = text.index('"', j + len(quoted))
        out.append(text[i:j])
        out.append(text[j + len(quoted):k])
        i = k + 1
    out.append(text[i:])
    return "".join(out) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))
