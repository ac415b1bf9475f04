import numpy as np
rng = np.random.default_rng(20160101)
W, H = 1950.0, 1740.0
# Road polylines (metres); sites are dropped along them with small lateral offsets.
roads = [
    [(0, 420), (700, 520), (1300, 610), (1950, 700)],
    [(0, 1260), (620, 1180), (1250, 1120), (1950, 1010)],
    [(380, 0), (450, 620), (520, 1200), (600, 1740)],
    [(1180, 0), (1240, 700), (1320, 1300), (1380, 1740)],
    [(850, 560), (1000, 880), (1150, 1140)],
]
def length(poly):
    return sum(np.hypot(b[0]-a[0], b[1]-a[1]) for a, b in zip(poly, poly[1:]))
def point_at(poly, s):
    for a, b in zip(poly, poly[1:]):
        seg = np.hypot(b[0]-a[0], b[1]-a[1])
        if s <= seg:
            t = s / seg
            d = np.array([b[0]-a[0], b[1]-a[1]]) / seg
            return np.array(a) + t*(np.array(b)-np.array(a)), d
        s -= seg
    a, b = poly[-2], poly[-1]
    seg = np.hypot(b[0]-a[0], b[1]-a[1])
    return np.array(b, float), np.array([b[0]-a[0], b[1]-a[1]]) / seg
lens = np.array([length(r) for r in roads])
counts = np.round(62 * lens / lens.sum()).astype(int)
counts[np.argmax(counts)] += 62 - counts.sum()
pts = []
for road, n, L in zip(roads, counts, lens):
    s = np.sort(rng.uniform(0, L, n))
    for si in s:
        p, d = point_at(road, si)
        normal = np.array([-d[1], d[0]])
        q = p + normal * rng.normal(0, 35)
        q = np.clip(q, 5, [W-5, H-5])
        pts.append(q)
pts = np.array(pts)
assert len(pts) == 62
print("id,x,y,radius")
for i, (x, y) in enumerate(pts, 1):
    print(f"{i},{x:.1f},{y:.1f},700")
