#!/usr/bin/env python3
"""Assemble the North Carolina generalized-county fixture under data/nc/.

Inputs:
  * 2016 Census cartographic county boundaries (cb_2016_us_county_500k), as
    shipped in the `plotly-geo` wheel. Pass the shapefile stem with --shapefile.
  * 2010 population shares of the 107 generalized counties (embedded below).
  * 2016 U.S. House two-party votes for the split sub-counties (embedded).
  * Approximate two-party Democratic shares for the 97 unsplit counties
    (embedded, see data/nc/README.md for provenance and caveats).

Geometry is projected to NC State Plane (EPSG:32119, metres). Split counties are
cut into sub-counties by Voronoi cells of fixed generator points, so sub areas
sum exactly to the parent area.

Requires: pyshp, shapely>=2, pyproj.
"""

import argparse
import csv
import itertools
import json
import math
import os

import pyproj
import shapefile
from shapely.geometry import MultiPoint, Point, shape
from shapely.ops import transform, unary_union, voronoi_diagram

STATE_POPULATION = 9_535_483

# Percent of state population per generalized county (2010 census, 2 decimals).
SHARES = {
    "Forsyth": 3.68, "Cumberland": 3.35, "Durham": 2.81, "Guilford 1": 2.56,
    "Guilford 2": 2.56, "Buncombe": 2.50, "Mecklenburg 1": 2.41,
    "Mecklenburg 2": 2.41, "Mecklenburg 3": 2.41, "Mecklenburg 4": 2.41,
    "Wake 4": 2.36, "Wake 1": 2.36, "Wake 2": 2.36, "Wake 3": 2.36,
    "Gaston": 2.16, "New Hanover": 2.13, "Union": 2.11, "Cabarrus": 1.87,
    "Onslow": 1.86, "Johnston": 1.77, "Pitt": 1.76, "Davidson": 1.71,
    "Iredell": 1.67, "Catawba": 1.62, "Alamance": 1.58, "Randolph": 1.49,
    "Rowan": 1.45, "Robeson": 1.41, "Orange": 1.40, "Wayne": 1.29,
    "Harnett": 1.20, "Brunswick": 1.13, "Henderson": 1.12, "Craven": 1.09,
    "Cleveland": 1.03, "Nash": 1.01, "Rockingham": 0.98, "Burke": 0.95,
    "Moore": 0.93, "Caldwell": 0.87, "Wilson": 0.85, "Lincoln": 0.82,
    "Surry": 0.77, "Wilkes": 0.73, "Rutherford": 0.71, "Carteret": 0.70,
    "Chatham": 0.67, "Sampson": 0.67, "Franklin": 0.64, "Stanly": 0.64,
    "Granville": 0.63, "Lenoir": 0.62, "Haywood": 0.62, "Duplin": 0.61,
    "Columbus": 0.61, "Lee": 0.61, "Edgecombe": 0.59, "Halifax": 0.57,
    "Pender": 0.55, "Watauga": 0.54, "Beaufort": 0.50, "Stokes": 0.50,
    "Hoke": 0.49, "Richmond": 0.49, "Vance": 0.48, "McDowell": 0.47,
    "Davie": 0.43, "Pasquotank": 0.43, "Jackson": 0.42, "Person": 0.41,
    "Yadkin": 0.40, "Alexander": 0.39, "Scotland": 0.38, "Bladen": 0.37,
    "Macon": 0.36, "Dare": 0.36, "Transylvania": 0.35, "Montgomery": 0.29,
    "Cherokee": 0.29, "Ashe": 0.29, "Anson": 0.28, "Hertford": 0.26,
    "Martin": 0.26, "Caswell": 0.25, "Currituck": 0.25, "Northampton": 0.23,
    "Greene": 0.22, "Bertie": 0.22, "Warren": 0.22, "Madison": 0.22,
    "Polk": 0.22, "Yancey": 0.19, "Avery": 0.19, "Mitchell": 0.16,
    "Chowan": 0.16, "Swain": 0.15, "Perquimans": 0.14, "Washington": 0.14,
    "Pamlico": 0.14, "Gates": 0.13, "Alleghany": 0.12, "Clay": 0.11,
    "Jones": 0.11, "Camden": 0.10, "Graham": 0.09, "Hyde": 0.06,
    "Tyrrell": 0.05,
}

# 2016 U.S. House two-party votes: parent totals and per sub-county splits.
PARENT_VOTES = {
    "Mecklenburg": (279_110, 177_589),
    "Guilford": (142_903, 107_029),
    "Wake": (296_935, 216_690),
}
SUB_VOTES = {
    "Mecklenburg 1": (88_257, 25_917), "Mecklenburg 2": (73_529, 40_646),
    "Mecklenburg 3": (66_745, 47_430), "Mecklenburg 4": (50_580, 63_595),
    "Guilford 1": (69_143, 55_823), "Guilford 2": (73_760, 51_206),
    "Wake 1": (75_323, 52_621), "Wake 2": (77_867, 48_538),
    "Wake 3": (78_125, 53_606), "Wake 4": (65_620, 61_925),
}

# Voronoi generators per sub-county, as fractions of the parent bounding box.
# Several generators for one sub-county are unioned.
SPLIT_GENERATORS = {
    "Mecklenburg": [
        [(0.4558370301008963, 0.573737937698022)],
        [(0.31014048456179916, 0.9619703529239232), (0.6827949922347536, 0.6513380714741996)],
        [(0.43791540702638637, 0.2355222642360959)],
        [(0.2544225147423218, 0.671825776515449)],
    ],
    "Wake": [
        [(0.30212073038356935, 0.5597645056636427)],
        [(0.6054566663476355, 0.6553900151448113)],
        [(0.31220338030865935, 0.2790996792774696)],
        [(0.47040134558045554, 0.6010271057907173)],
    ],
    "Guilford": [[(0.25, 0.5)], [(0.75, 0.5)]],
}

# County pairs facing each other across a river or sound. The census treats
# them as adjacent; the land-clipped cartographic shapes do not touch.
WATER_CONTACTS = [
    ("Bertie", "Chowan"), ("Chowan", "Washington"), ("Dare", "Tyrrell"),
    ("Carteret", "Pamlico"), ("Carteret", "Hyde"), ("Hyde", "Pamlico"),
]
# Pairs separated by a digitising sliver in the cartographic file.
SLIVER_CONTACTS = [("Buncombe", "Transylvania")]

# Weak-border pairs removed from algorithmic adjacency.
OVERRIDES = [
    ("Halifax", "Franklin"), ("Henderson", "Haywood"), ("Johnston", "Franklin"),
    ("Lincoln", "Burke"), ("Montgomery", "Anson"), ("Moore", "Cumberland"),
    ("Richmond", "Hoke"), ("Rockingham", "Alamance"), ("Rockingham", "Forsyth"),
    ("Rowan", "Montgomery"), ("Scotland", "Moore"), ("Stanly", "Davidson"),
    ("Stanly", "Richmond"), ("Stokes", "Guilford"), ("Surry", "Forsyth"),
    ("Wake", "Nash"), ("Warren", "Nash"),
]

# Seed order defines district labels 1..13.
SEEDS = [
    "Forsyth", "New Hanover", "Wayne", "Nash", "Union", "Mecklenburg 1",
    "Mecklenburg 2", "Guilford 1", "Guilford 2", "Wake 4", "Wake 2",
    "Cumberland", "Buncombe",
]

# Lowest-deviation published plan, as generalized-county indices per district
# (indices follow alphabetical order of generalized-county names).
BEST_PLAN = [
    [34, 29, 84, 106, 30],
    [69, 10, 24, 75, 9, 31, 71, 53],
    [103, 52, 44, 55, 54, 40, 25, 16],
    [68, 105, 78, 7, 73, 33, 49, 101, 28, 59, 43, 8, 93, 21, 27, 76, 74, 15],
    [94, 63, 36, 23, 4],
    [61, 64, 56, 18, 12],
    [62, 13, 50, 2, 104, 14],
    [41, 80, 83, 17, 89, 90, 3, 5, 102, 6, 65],
    [42, 1, 72, 77, 39, 95, 100, 70, 47, 37],
    [99, 32, 96],
    [97, 98, 19, 67, 35],
    [26, 82, 86, 87, 48, 81, 66, 88],
    [11, 46, 85, 58, 45, 91, 79, 92, 107, 51, 60, 38, 20, 57, 22],
]

# Approximate two-party Democratic share (percent) by county for the 2016
# general election, used as a proxy for unsplit-county House votes before
# statewide calibration. Rounded, not authoritative.
DEM_SHARE_APPROX = {
    "Alamance": 43, "Alexander": 22, "Alleghany": 27, "Anson": 53, "Ashe": 27,
    "Avery": 21, "Beaufort": 37, "Bertie": 62, "Bladen": 44, "Brunswick": 35,
    "Buncombe": 57, "Burke": 30, "Cabarrus": 38, "Caldwell": 24, "Camden": 25,
    "Carteret": 27, "Caswell": 42, "Catawba": 31, "Chatham": 54, "Cherokee": 22,
    "Chowan": 42, "Clay": 23, "Cleveland": 34, "Columbus": 37, "Craven": 38,
    "Cumberland": 58, "Currituck": 25, "Dare": 37, "Davidson": 27, "Davie": 27,
    "Duplin": 39, "Durham": 81, "Edgecombe": 67, "Forsyth": 55, "Franklin": 44,
    "Gaston": 33, "Gates": 44, "Graham": 20, "Granville": 47, "Greene": 43,
    "Halifax": 63, "Harnett": 37, "Haywood": 36, "Henderson": 35,
    "Hertford": 71, "Hoke": 54, "Hyde": 41, "Iredell": 32, "Jackson": 42,
    "Johnston": 32, "Jones": 41, "Lee": 42, "Lenoir": 47, "Lincoln": 26,
    "Macon": 30, "Madison": 37, "Martin": 48, "McDowell": 27, "Mitchell": 21,
    "Montgomery": 36, "Moore": 34, "Nash": 50, "New Hanover": 47,
    "Northampton": 66, "Onslow": 30, "Orange": 76, "Pamlico": 36,
    "Pasquotank": 48, "Pender": 35, "Perquimans": 35, "Person": 40, "Pitt": 53,
    "Polk": 35, "Randolph": 21, "Richmond": 42, "Robeson": 46,
    "Rockingham": 33, "Rowan": 30, "Rutherford": 26, "Sampson": 41,
    "Scotland": 49, "Stanly": 25, "Stokes": 23, "Surry": 24, "Swain": 38,
    "Transylvania": 39, "Tyrrell": 42, "Union": 35, "Vance": 64, "Warren": 66,
    "Washington": 58, "Watauga": 47, "Wayne": 43, "Wilkes": 22, "Wilson": 54,
    "Yadkin": 19, "Yancey": 33,
}
# Statewide two-party Democratic share of the 2016 House vote (46.6 / 99.8).
STATEWIDE_DEM_TWO_PARTY = 46.6 / (46.6 + 53.2)
# Two-party House votes per resident, applied to unsplit counties.
TURNOUT_PER_RESIDENT = 0.48

POINT_CONTACT_KM = 0.1


def base_name(name):
    head, _, tail = name.rpartition(" ")
    return head if tail.isdigit() else name


def load_counties(stem):
    sf = shapefile.Reader(stem)
    fields = [f[0] for f in sf.fields[1:]]
    project = pyproj.Transformer.from_crs(4269, 32119, always_xy=True).transform
    out = {}
    for sr in sf.iterShapeRecords():
        rec = dict(zip(fields, sr.record))
        if rec["STATEFP"] == "37":
            out[rec["NAME"]] = transform(project, shape(sr.shape.__geo_interface__))
    assert len(out) == 100, len(out)
    return out


def cut(poly, groups):
    minx, miny, maxx, maxy = poly.bounds
    pts, labels = [], []
    for k, group in enumerate(groups):
        for fx, fy in group:
            pts.append(Point(minx + fx * (maxx - minx), miny + fy * (maxy - miny)))
            labels.append(k)
    cells = voronoi_diagram(MultiPoint(pts), envelope=poly.envelope.buffer(10_000))
    parts = [[] for _ in groups]
    for p, k in zip(pts, labels):
        parts[k].append(next(c for c in cells.geoms if c.contains(p)))
    subs = [unary_union(ps).intersection(poly) for ps in parts]
    assert all(s.geom_type == "Polygon" for s in subs)
    return subs


def shared_length_km(a, b):
    return a.boundary.intersection(b.boundary).length / 1000.0


def logistic(x):
    return 1.0 / (1.0 + math.exp(-x))


def logit(p):
    return math.log(p / (1.0 - p))


def largest_remainder(weights, total):
    s = sum(weights)
    raw = [w / s * total for w in weights]
    counts = [math.floor(r) for r in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    return counts


def calibrate_votes(populations, split_votes):
    """Shift unsplit-county logits so the statewide two-party share matches."""
    names = sorted(DEM_SHARE_APPROX)
    totals = {n: round(populations[n] * TURNOUT_PER_RESIDENT) for n in names}
    fixed_d = sum(d for d, _ in split_votes.values())
    fixed_t = sum(d + r for d, r in split_votes.values())
    target = STATEWIDE_DEM_TWO_PARTY * (fixed_t + sum(totals.values())) - fixed_d

    def dem_total(shift):
        return sum(totals[n] * logistic(logit(DEM_SHARE_APPROX[n] / 100.0) + shift) for n in names)

    lo, hi = -2.0, 2.0
    for _ in range(100):
        mid = (lo + hi) / 2
        if dem_total(mid) < target:
            lo = mid
        else:
            hi = mid
    shift = (lo + hi) / 2
    votes = {}
    for n in names:
        d = round(totals[n] * logistic(logit(DEM_SHARE_APPROX[n] / 100.0) + shift))
        votes[n] = (d, totals[n] - d)
    return votes, shift


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--shapefile", required=True, help="path stem of cb_2016_us_county_500k")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "nc"))
    args = ap.parse_args()

    counties = load_counties(args.shapefile)
    assert set(DEM_SHARE_APPROX) | set(PARENT_VOTES) == set(counties)

    geo = {}
    sub_names = {}
    for name in sorted(counties):
        if name in SPLIT_GENERATORS:
            subs = cut(counties[name], SPLIT_GENERATORS[name])
            sub_names[name] = [f"{name} {i + 1}" for i in range(len(subs))]
            for sn, poly in zip(sub_names[name], subs):
                geo[sn] = poly
        else:
            geo[name] = counties[name]
    names = sorted(geo)
    assert len(names) == 107 and set(names) == set(SHARES)

    # Populations: largest-remainder reconstruction from the published shares.
    pops = dict(zip(names, largest_remainder([SHARES[n] for n in names], STATE_POPULATION)))
    parent_pops = {p: sum(pops[s] for s in subs) for p, subs in sub_names.items()}

    votes, shift = calibrate_votes(pops, SUB_VOTES)

    # Contacts between generalized counties.
    water = {frozenset(p) for p in WATER_CONTACTS}
    sliver = {frozenset(p) for p in SLIVER_CONTACTS}
    rows = []
    for a, b in itertools.combinations(names, 2):
        pa, pb = base_name(a), base_name(b)
        key = frozenset((pa, pb))
        if pa == pb or geo[a].distance(geo[b]) < 1.0:
            km = shared_length_km(geo[a], geo[b])
            if km < POINT_CONTACT_KM:
                km = 0.0
            rows.append((a, b, km))
        elif key in water and geo[a].distance(geo[b]) < 10_000:
            rows.append((a, b, 0.0))
        elif key in sliver and geo[a].distance(geo[b]) < 50:
            band = geo[a].buffer(25).intersection(geo[b].buffer(25))
            rows.append((a, b, band.length / 2000.0))
    # Sanity: district perimeter from parts equals the true union perimeter.
    by_index = {i + 1: n for i, n in enumerate(names)}
    border = {frozenset((a, b)): km for a, b, km in rows}
    for col in BEST_PLAN:
        members = [by_index[i] for i in col]
        union = unary_union([geo[m] for m in members])
        from_parts = sum(geo[m].length for m in members) / 1000.0 - 2 * sum(
            border.get(frozenset(p), 0.0) for p in itertools.combinations(members, 2))
        assert abs(union.length / 1000.0 - from_parts) < 1e-3 * from_parts, (members, union.length, from_parts)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "counties.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "name", "pop_share", "population", "dem_votes", "rep_votes", "area_km2", "perimeter_km"])
        for i, name in enumerate(sorted(counties), start=1):
            poly = counties[name]
            if name in sub_names:
                share = sum(SHARES[s] for s in sub_names[name]) / 100.0
                d, r = PARENT_VOTES[name]
                pop = parent_pops[name]
            else:
                share = SHARES[name] / 100.0
                d, r = votes[name]
                pop = pops[name]
            w.writerow([i, name, f"{share:.4f}", pop, d, r, f"{poly.area / 1e6:.3f}", f"{poly.length / 1000:.3f}"])
    with open(os.path.join(args.out, "splits.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["parent", "sub_name", "dem_votes", "rep_votes", "area_km2", "perimeter_km"])
        for parent in sorted(sub_names):
            for s in sub_names[parent]:
                d, r = SUB_VOTES[s]
                w.writerow([parent, s, d, r, f"{geo[s].area / 1e6:.3f}", f"{geo[s].length / 1000:.3f}"])
    with open(os.path.join(args.out, "adjacency.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name_a", "name_b", "border_km", "algo_adjacent"])
        for a, b, km in rows:
            w.writerow([a, b, f"{km:.3f}", 1])
    with open(os.path.join(args.out, "overrides.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name_a", "name_b"])
        w.writerows(OVERRIDES)
    with open(os.path.join(args.out, "seeds.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerows([s] for s in SEEDS)
    with open(os.path.join(args.out, "state.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["name", "population"])
        w.writerow(["North Carolina", STATE_POPULATION])
    with open(os.path.join(args.out, "best_plan.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["county_name", "district_label"])
        for label, col in enumerate(BEST_PLAN, start=1):
            for i in col:
                w.writerow([by_index[i], label])
    print(f"wrote {len(names)} generalized counties, {len(rows)} contacts, logit shift {shift:+.4f}")


if __name__ == "__main__":
    main()
