"""Face tracing for straight-line planar embeddings.

Faces are traced from the rotation system induced by vertex coordinates.
Bounded faces come out counterclockwise (interior on the left); the outer
face is the unique clockwise one.  Used to build dual vertices of
superposition graphs and face cycles for Kasteleyn orientations.
"""

from __future__ import annotations

import math

from .errors import NonPlanarInput


def rotation_system(coords, adjacency):
    """Neighbors of each vertex sorted counterclockwise by angle."""
    rot = []
    for u, nbrs in enumerate(adjacency):
        rot.append(
            sorted(
                nbrs,
                key=lambda v: math.atan2(
                    coords[v][1] - coords[u][1], coords[v][0] - coords[u][0]
                ),
            )
        )
    return rot

def trace_faces(coords, edges, n_vertices):
    """All faces of the embedded graph as dart cycles.

    Returns (faces, outer) where faces is a list of dart lists [(u, v), ...]
    and outer indexes the unbounded face.  Raises NonPlanarInput when the
    rotation system is inconsistent with a planar embedding (Euler check on
    the traced face count, per connected component).
    """
    adjacency = [[] for _ in range(n_vertices)]
    for u, v in edges:
        adjacency[u].append(v)
        adjacency[v].append(u)
    rot = rotation_system(coords, adjacency)
    pos = [{v: i for i, v in enumerate(r)} for r in rot]

    faces = []
    seen = set()
    for u, v in [(a, b) for a, b in edges] + [(b, a) for a, b in edges]:
        if (u, v) in seen:
            continue
        face = []
        a, b = u, v
        while (a, b) not in seen:
            seen.add((a, b))
            face.append((a, b))
            # turn clockwise around b: predecessor of a in the rotation at b
            r = rot[b]
            a, b = b, r[(pos[b][a] - 1) % len(r)]
        faces.append(face)

    # Euler characteristic check per connected component
    comp = _components(adjacency)
    n_comp = len(set(comp)) if n_vertices else 0
    if n_vertices - len(edges) + len(faces) != 1 + n_comp:
        raise NonPlanarInput(
            "rotation system does not define a planar embedding "
            f"(V={n_vertices}, E={len(edges)}, F={len(faces)})"
        )

    outer = min(range(len(faces)), key=lambda i: _signed_area(coords, faces[i]))
    if _signed_area(coords, faces[outer]) >= 0:
        raise NonPlanarInput("no clockwise outer face found")
    return faces, outer


def _signed_area(coords, face):
    s = 0.0
    for u, v in face:
        s += coords[u][0] * coords[v][1] - coords[v][0] * coords[u][1]
    return 0.5 * s


def _components(adjacency):
    comp = [-1] * len(adjacency)
    c = 0
    for s in range(len(adjacency)):
        if comp[s] >= 0:
            continue
        stack = [s]
        comp[s] = c
        while stack:
            u = stack.pop()
            for v in adjacency[u]:
                if comp[v] < 0:
                    comp[v] = c
                    stack.append(v)
        c += 1
    return comp
