"""Named test problems."""
from __future__ import annotations

from .expr import parse_expr
from .errors import DomainError

PRESETS = {
    # du = u_xx dt + u_xx dW, u(0) = exp(-x^2/2)
    "paper-example": {
        "coefficients": {"a": 1.0, "b": 0.0, "c": 0.0, "rho": 1.0, "sigma": 0.0, "nu": 0.0},
        "v": "exp(-x^2/2)", "f": None, "g": None,
    },
    "variable-coefficient": {
        "coefficients": {"a": "1 + 0.2*sin(x)", "b": 0.1, "c": 0.0,
                         "rho": 0.5, "sigma": 0.1, "nu": 0.0},
        "v": "exp(-x^2/2)", "f": None, "g": None,
    },
}


def preset(name: str) -> dict:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise DomainError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    return {"coefficients": {k: parse_expr(v) for k, v in spec["coefficients"].items()},
            "v": parse_expr(spec["v"]),
            "f": None if spec["f"] is None else parse_expr(spec["f"]),
            "g": None if spec["g"] is None else parse_expr(spec["g"])}


def coefficient_set(name: str):
    from .parabolic1d import CoefficientSet
    return CoefficientSet(**preset(name)["coefficients"])
