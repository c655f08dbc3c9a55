"""Writes genus2.off: the boundary of a 3x5x1 voxel slab with two holes,
each unit face split into s x s squares and each square into two triangles."""
import sys

s = int(sys.argv[1]) if len(sys.argv) > 1 else 2
filled = {(i, j, 0) for i in range(3) for j in range(5)} - {(1, 1, 0), (1, 3, 0)}

verts, index, faces = [], {}, []


def vid(p):
    if p not in index:
        index[p] = len(verts)
        verts.append(p)
    return index[p]


dirs = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
for (i, j, k) in sorted(filled):
    for d in dirs:
        if (i + d[0], j + d[1], k + d[2]) in filled:
            continue
        axis = [a for a in range(3) if d[a] != 0][0]
        sign = d[axis]
        u_ax, v_ax = [a for a in range(3) if a != axis]
        # orient so that (u x v) points along the outward normal
        if (u_ax, v_ax, axis) not in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
            u_ax, v_ax = v_ax, u_ax
        if sign < 0:
            u_ax, v_ax = v_ax, u_ax
        base = [i * s, j * s, k * s]
        if sign > 0:
            base[axis] += s
        for a in range(s):
            for b in range(s):
                def corner(da, db):
                    p = list(base)
                    p[u_ax] += a + da
                    p[v_ax] += b + db
                    return vid(tuple(p))
                c00, c10, c11, c01 = corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)
                faces.append((c00, c10, c11))
                faces.append((c00, c11, c01))

edges = {tuple(sorted((f[a], f[(a + 1) % 3]))) for f in faces for a in range(3)}
print("V", len(verts), "E", len(edges), "F", len(faces), "chi", len(verts) - len(edges) + len(faces), file=sys.stderr)
with open("genus2.off", "w") as out:
    out.write("OFF\n%d %d 0\n" % (len(verts), len(faces)))
    for p in verts:
        out.write("%g %g %g\n" % tuple(c / s for c in p))
    for f in faces:
        out.write("3 %d %d %d\n" % f)
