"""Built-in example systems."""
from .exceptions import UnknownExample
from .system import Dlcs, Lcs

_LCS = {
    "cam31": dict(a_tilde=[[1.0]], c_tilde=[[2.0, -2.0]], d_tilde=[[1.0], [-1.0]],
                  f_tilde=[[1.0, 3.0], [0.0, 1.0]]),
    "cam32": dict(a_tilde=[[-1.0]], c_tilde=[[0.0, 1.0]], d_tilde=[[1.0], [1.0]],
                  f_tilde=[[1.0, 3.0], [0.0, 1.0]]),
    "cam33": dict(
        a_tilde=[[-5.0, -4.0, 0.0], [-1.0, -2.0, 0.0], [0.0, 0.0, 1.0]],
        c_tilde=[[-3.0, 0.0, 0.0], [-21.0, 0.0, 0.0], [0.0, 2.0, -2.0]],
        d_tilde=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]],
        f_tilde=[[1.0, 0.0, 0.0], [0.0, 1.0, 3.0], [0.0, 0.0, 1.0]],
    ),
    "hem2": dict(
        a_tilde=[[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0],
                 [-2.0, 1.0, 0.0, 0.0], [1.0, -1.0, 0.0, 0.0]],
        c_tilde=[[0.0], [0.0], [1.0], [0.0]],
        d_tilde=[[1.0, 0.0, 0.0, 0.0]],
        f_tilde=[[1.0]],
    ),
}

_DLCS = {
    # C is printed as a single column; the second multiplier does not act
    # on the state, so it is padded with zeros to match F
    "qp0": dict(a=[[0.5, 0.25], [-0.25, 0.5]], c=[[3.0, 0.0], [5.0, 0.0]],
                d=[[1.0, 0.0], [0.0, 0.0]], f=[[1.0, -1.0], [1.0, 0.0]]),
}


def names():
    return sorted(_LCS) + sorted(_DLCS)


def get(name):
    """An :class:`Lcs` (continuous examples) or :class:`Dlcs` (qp0)."""
    if name in _LCS:
        return Lcs(**_LCS[name], name=name)
    if name in _DLCS:
        return Dlcs(**_DLCS[name], name=name)
    raise UnknownExample(f"unknown example {name!r}; choose from {', '.join(names())}")
