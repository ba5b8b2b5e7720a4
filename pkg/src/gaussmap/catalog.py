"""Built-in Weierstrass data."""

from __future__ import annotations

from .polynomial import INF, Polynomial, RationalMap
from .weierstrass import WeierstrassData


def _monomial_map(k: int, c: complex = 1.0) -> RationalMap:
    if k >= 0:
        return RationalMap(Polynomial.monomial(k, c), Polynomial([1.0]))
    return RationalMap(Polynomial([c]), Polynomial.monomial(-k))


def catenoid() -> WeierstrassData:
    return WeierstrassData(_monomial_map(1), _monomial_map(-1), (0j, INF), "catenoid")


def enneper(k: int = 1) -> WeierstrassData:
    """Enneper surface of order ``k``: ``g = z^k, h = z^k`` with one end at infinity."""
    name = "enneper" if k == 1 else f"enneper{k}"
    return WeierstrassData(_monomial_map(k), _monomial_map(k), (INF,), name)


BUILTINS = {
    "catenoid": catenoid,
    "enneper": lambda: enneper(1),
    "enneper2": lambda: enneper(2),
    "enneper3": lambda: enneper(3),
}


def builtin(name: str) -> WeierstrassData:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown built-in surface {name!r}; known: {', '.join(sorted(BUILTINS))}") from None
