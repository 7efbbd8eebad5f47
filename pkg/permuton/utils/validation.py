"""
Permuton validation utilities
"""
import math
from typing import Any, Dict, List

METHOD_HINTS = ("auto", "oracle", "ipf", "simple", "continuation", "quad3x3")


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _validate_breakpoints(label: str, points: Any) -> List[str]:
    if not isinstance(points, list) or len(points) < 2:
        return [f"'{label}' must be a list of at least two numbers"]
    if not all(_is_number(p) for p in points):
        return [f"'{label}' must contain only finite numbers"]
    errors = []
    if points[0] != 0 or points[-1] != 1:
        errors.append(f"'{label}' must start at 0 and end at 1")
    if any(b <= a for a, b in zip(points, points[1:])):
        errors.append(f"'{label}' must be strictly increasing")
    return errors


def validate_region_document(document: Dict[str, Any]) -> List[str]:
    """Validate a region document and return list of errors"""
    errors = []
    if not isinstance(document, dict):
        return ["Region document must be an object"]

    for field in ("x", "y", "I"):
        if field not in document:
            errors.append(f"Missing required field: {field}")
    if errors:
        return errors

    errors += _validate_breakpoints("x", document["x"])
    errors += _validate_breakpoints("y", document["y"])

    rows = document["I"]
    if not isinstance(rows, list) or not rows or not all(isinstance(row, list) for row in rows):
        errors.append("'I' must be a non-empty list of rows")
        return errors
    if any(cell not in (0, 1) or isinstance(cell, bool) for row in rows for cell in row):
        errors.append("'I' must contain only 0 and 1")
    widths = {len(row) for row in rows}
    if len(widths) != 1:
        errors.append(f"'I' rows have different lengths: {sorted(widths)}")
    elif isinstance(document["x"], list) and isinstance(document["y"], list):
        expected = (len(document["y"]) - 1, len(document["x"]) - 1)
        if (len(rows), widths.pop()) != expected:
            errors.append(f"'I' must have {expected[0]} rows of {expected[1]} entries")

    if "r" in document and not _is_number(document["r"]):
        errors.append("'r' must be a finite number")
    if "method" in document and document["method"] not in METHOD_HINTS:
        errors.append(f"Unknown method hint: {document['method']}")
    return errors


def validate_field_document(document: Dict[str, Any]) -> List[str]:
    """Validate a serialized density field and return list of errors"""
    if not isinstance(document, dict):
        return ["Field document must be an object"]
    errors = []
    for field in ("region", "rects"):
        if field not in document:
            errors.append(f"Missing required field: {field}")
    if errors:
        return errors

    errors += [f"region: {e}" for e in validate_region_document(document["region"])]
    rects = document["rects"]
    if not isinstance(rects, list):
        errors.append("'rects' must be a list")
        return errors

    region = document["region"]
    region_ok = not validate_region_document(region)
    seen = set()
    for i, rect in enumerate(rects):
        if not isinstance(rect, dict):
            errors.append(f"Rect {i} must be an object")
            continue
        if not all(isinstance(rect.get(key), int) for key in ("u", "v")):
            errors.append(f"Rect {i} needs integer 'u' and 'v'")
            continue
        key = (rect["u"], rect["v"])
        if key in seen:
            errors.append(f"Rect {i} repeats cell {key}")
        seen.add(key)
        if region_ok:
            k, ell = len(region["x"]) - 1, len(region["y"]) - 1
            if not (0 <= key[0] < k and 0 <= key[1] < ell):
                errors.append(f"Rect {i} cell {key} lies outside the region")
                continue
            if region["I"][ell - 1 - key[1]][key[0]] != 1:
                errors.append(f"Rect {i} sits on cell {key} where I=0")
        kind = rect.get("kind", "moebius")
        if kind == "constant":
            if not _is_number(rect.get("value")):
                errors.append(f"Rect {i} needs a finite 'value'")
        elif kind == "moebius":
            missing = [c for c in "abcd" if not _is_number(rect.get(c))]
            if missing:
                errors.append(f"Rect {i} missing coefficients: {missing}")
        else:
            errors.append(f"Rect {i} has unknown kind: {kind}")
    return errors
