from typing import Any, Iterable, Tuple

Label = Tuple[int, ...]

# Reserved values outside the concrete alphabet {0..k-1}
BOTTOM = -1
BAD = -2

ROOT_TOKEN = "eps"

_VALUE_NAMES = {BOTTOM: "bot", BAD: "bad"}
_VALUE_ALIASES = {"bot": BOTTOM, "bottom": BOTTOM, "⊥": BOTTOM, "none": BOTTOM, "bad": BAD}


class Codec:
    @staticmethod
    def format_label(label: Iterable[int]) -> str:
        """Dot-join a label, the root becomes 'eps'"""
        label = tuple(label)
        if not label:
            return ROOT_TOKEN
        return ".".join(str(pid) for pid in label)

    @staticmethod
    def parse_label(text: str) -> Label:
        """Inverse of format_label"""
        text = text.strip()
        if text in (ROOT_TOKEN, ""):
            return ()
        return tuple(int(part) for part in text.split("."))

    @staticmethod
    def format_value(value: int) -> str:
        return _VALUE_NAMES.get(value, str(value))

    @staticmethod
    def parse_value(raw: Any) -> int:
        """Accept ints, numeric strings, and the names of the two reserved values"""
        if isinstance(raw, bool):
            raise ValueError(f"not a decision value: {raw!r}")
        if isinstance(raw, int):
            return raw
        text = str(raw).strip().lower()
        if text in _VALUE_ALIASES:
            return _VALUE_ALIASES[text]
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"not a decision value: {raw!r}")

    @staticmethod
    def external(value: int) -> int:
        """Map BAD to bottom for agreement and validity checks"""
        return BOTTOM if value == BAD else value
