"""Hypothesis strategies for points of the model spaces."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from hadeq import Euclidean, Hyperboloid, StarTree

coord = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)
unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def points(space, n=1):
    """Strategy producing a tuple of ``n`` coordinate arrays of ``space``."""
    if isinstance(space, Euclidean):
        one = st.lists(coord, min_size=space.dim, max_size=space.dim).map(np.array)
    elif isinstance(space, Hyperboloid):
        one = st.lists(coord, min_size=space.dim, max_size=space.dim).map(lambda v: space.lift(v).coords)
    elif isinstance(space, StarTree):
        one = st.tuples(
            st.integers(0, space.rays - 1), st.floats(min_value=0.0, max_value=3.0, allow_nan=False)
        ).map(lambda rr: space.normalize(np.array(rr, dtype=float)))
    else:
        raise TypeError(space)
    return st.tuples(*[one] * n)


SPACES = [Euclidean(2), Hyperboloid(2), StarTree(3)]
