#!/usr/bin/env python3
"""Writes the bundled example meshes into data/meshes/."""

import argparse
import math
from pathlib import Path


def write_obj(path, verts, faces, comment):
    with open(path, "w") as f:
        f.write(f"# {comment}\n")
        for v in verts:
            f.write("v {:.17g} {:.17g} {:.17g}\n".format(*v))
        for t in faces:
            f.write("f {} {} {}\n".format(*(i + 1 for i in t)))


def grid(nx, ny, width, height):
    verts = [(width * i / (nx - 1), height * j / (ny - 1), 0.0) for j in range(ny) for i in range(nx)]
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            b, c, d = a + 1, a + nx, a + nx + 1
            # Alternate the diagonal so the mesh has no preferred direction.
            if (i + j) % 2 == 0:
                faces += [(a, b, d), (a, d, c)]
            else:
                faces += [(a, b, c), (b, d, c)]
    return verts, faces


def uv_sphere(segments, rings, radius=1.0):
    verts = [(0.0, 0.0, radius)]
    for r in range(1, rings):
        theta = math.pi * r / rings
        for s in range(segments):
            phi = 2.0 * math.pi * s / segments
            verts.append((radius * math.sin(theta) * math.cos(phi),
                          radius * math.sin(theta) * math.sin(phi),
                          radius * math.cos(theta)))
    verts.append((0.0, 0.0, -radius))
    south = len(verts) - 1
    ring = lambda r, s: 1 + (r - 1) * segments + (s % segments)
    faces = [(0, ring(1, s), ring(1, s + 1)) for s in range(segments)]
    for r in range(1, rings - 1):
        for s in range(segments):
            a, b = ring(r, s), ring(r, s + 1)
            c, d = ring(r + 1, s), ring(r + 1, s + 1)
            faces += [(a, c, d), (a, d, b)]
    faces += [(ring(rings - 1, s), south, ring(rings - 1, s + 1)) for s in range(segments)]
    return verts, faces


def icosphere(levels):
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [normalize(v) for v in verts]
    for _ in range(levels):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                cache[key] = len(verts)
                verts.append(normalize(tuple((x + y) / 2 for x, y in zip(verts[a], verts[b]))))
            return cache[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    return verts, faces


def normalize(v):
    n = math.sqrt(sum(x * x for x in v))
    return tuple(x / n for x in v)


def torus(nu, nv, major=1.0, minor=0.35):
    verts = []
    for i in range(nu):
        u = 2 * math.pi * i / nu
        for j in range(nv):
            v = 2 * math.pi * j / nv
            verts.append(((major + minor * math.cos(v)) * math.cos(u),
                          (major + minor * math.cos(v)) * math.sin(u),
                          minor * math.sin(v)))
    idx = lambda i, j: (i % nu) * nv + (j % nv)
    faces = []
    for i in range(nu):
        for j in range(nv):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
            faces += [(a, b, d), (a, d, c)]
    return verts, faces


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parent.parent / "data" / "meshes")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    write_obj(args.out / "triangle.obj", [(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2)], "single triangle")
    write_obj(args.out / "tetrahedron.obj",
              [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)],
              [(0, 1, 2), (0, 3, 1), (0, 2, 3), (1, 3, 2)], "regular tetrahedron")
    write_obj(args.out / "bar_2d.obj", *grid(121, 31, 4.0, 1.0), "planar 4 x 1 bar, 121 x 31 vertices")
    write_obj(args.out / "patch.obj", *grid(17, 17, 1.0, 1.0), "unit square, 17 x 17 vertices")
    write_obj(args.out / "sphere.obj", *uv_sphere(40, 39), "unit UV sphere, 40 segments, 39 rings")
    write_obj(args.out / "sphere_12k.obj", *uv_sphere(80, 77), "unit UV sphere, 80 segments, 77 rings")
    write_obj(args.out / "icosphere.obj", *icosphere(3), "unit icosphere, 3 subdivisions")
    write_obj(args.out / "torus.obj", *torus(48, 16), "torus R=1 r=0.35")


if __name__ == "__main__":
    main()
