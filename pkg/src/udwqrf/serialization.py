"""JSON snapshots of grids, spaces, states and frame transforms.

Layout::

    {"species": {...}, "sectors": [...], "frame_role": ...,
     "grids": [{"axis", "kind", "n", "spacing", "params"}],
     "t": ..., "states": [{"sector", "entries": [[indices...], re, im]}]}
"""

from __future__ import annotations

import json

import numpy as np

from .fockspace import FockSpace, ModeGrid, SectorState, make_grid
from .kinematics import Species

AXES = ("excited", "ground", "photon", "frame")


def grid_to_dict(grid: ModeGrid) -> dict:
    return grid.to_dict()


def grid_from_dict(d: dict) -> ModeGrid:
    p = dict(d["params"])
    n_modes = p.pop("n_modes", d["n"])
    mass = p.pop("mass", 0.0)
    g = make_grid(d["kind"], mass, n_modes, d["spacing"], **p)
    if g.n != d["n"]:
        raise ValueError("grid snapshot is inconsistent (mode count)")
    return g


def space_to_dict(space: FockSpace) -> dict:
    grids = []
    for axis in AXES:
        g = space.grid(axis)
        if g is not None:
            grids.append({"axis": axis, **grid_to_dict(g)})
    return {
        "species": {"rest_mass": space.species.rest_mass, "internal_gap": space.species.internal_gap},
        "sectors": list(space.sectors),
        "frame_role": space.frame_role,
        "grids": grids,
    }


def space_from_dict(d: dict) -> FockSpace:
    grids = {g["axis"]: grid_from_dict(g) for g in d["grids"]}
    return FockSpace(
        Species(**d["species"]), grids["excited"], grids["ground"], grids["photon"], grids.get("frame"),
        d.get("frame_role"), tuple(d["sectors"]),
    )


def state_entries(state: SectorState, atol: float = 0.0) -> list[dict]:
    out = []
    for s in state.space.sectors:
        a = state.amps[s]
        idx = np.argwhere(np.abs(a) > atol)
        out.append({"sector": s, "entries": [[[int(i) for i in ix], float(a[tuple(ix)].real),
                                              float(a[tuple(ix)].imag)] for ix in idx]})
    return out


def snapshot(state: SectorState, atol: float = 0.0) -> dict:
    return {**space_to_dict(state.space), "t": state.t, "states": state_entries(state, atol)}


def state_from_snapshot(d: dict) -> SectorState:
    space = space_from_dict(d)
    st = space.zeros()
    for block in d["states"]:
        a = st.amps[block["sector"]]
        for ix, re, im in block["entries"]:
            a[tuple(ix)] = complex(re, im)
    return SectorState(space, st.amps, d.get("t", 0.0))


def transform_to_dict(q) -> dict:
    return {"m_A": q.m_A, "m_L": q.m_L, "mode": q.mode, "lab": grid_to_dict(q.lab),
            "aligned": q.aligned, "max_residual": float(q.residuals.max())}


def dumps(obj, **kw) -> str:
    return json.dumps(obj, sort_keys=True, **kw)


def save_snapshot(path, state: SectorState, atol: float = 0.0):
    with open(path, "w") as fh:
        fh.write(dumps(snapshot(state, atol), indent=1))


def load_snapshot(path) -> SectorState:
    with open(path) as fh:
        return state_from_snapshot(json.load(fh))
