#!/usr/bin/env python3
"""Independent reference values for the core crate.

Recomputes closed forms, hashing and rank statistics from first principles
and writes crates/core/tests/data/oracle.json. Rerun only when a formula
intentionally changes.
"""
import hashlib
import json
import math
import os
import random
import struct

from scipy import stats


def sha(b):
    return hashlib.sha256(b).digest()


def noise(seed, record, coord, sigma):
    h = sha(seed + record + struct.pack(">Q", coord) + struct.pack(">Q", 0))
    x, y = struct.unpack(">QQ", h[:16])
    u1 = ((x >> 11) + 1) * 2.0 ** -53
    u2 = (y >> 11) * 2.0 ** -53
    return sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def mth(leaves):
    # RFC 6962 tree hash, written recursively over raw leaf data
    if not leaves:
        return sha(b"")
    if len(leaves) == 1:
        return sha(b"\x00" + leaves[0])
    k = 1
    while k * 2 < len(leaves):
        k *= 2
    return sha(b"\x01" + mth(leaves[:k]) + mth(leaves[k:]))


def sigma(eps, dacc, n, gap):
    return gap * math.sqrt(2 * n * math.log(1 / dacc) * 2 * math.log(1.25 * n / dacc)) / eps


def eps_audit_full(eps, dacc, n, kmax, dpol):
    dcomp = dpol - kmax * dacc
    la = math.log(1 / dacc)
    if eps <= 1:
        eq = eps / math.sqrt(2 * n * la)
        m = kmax * n
        return math.sqrt(2 * m * math.log(1 / dcomp)) * eq + 2 * m * eq * eq
    return math.sqrt(kmax) * eps * math.sqrt(math.log(1 / dcomp) / la) + kmax * eps * eps / (4 * la)


def auc_pred(eps, dacc, n, k):
    z = math.sqrt(k) * eps / (2 * math.sqrt(2) * math.sqrt(math.log(1 / dacc) * math.log(1.25 * n / dacc)))
    return stats.norm.cdf(z)


def brute_auc(a, b):
    s = 0.0
    for x in a:
        for y in b:
            s += 1.0 if x > y else 0.5 if x == y else 0.0
    return s / (len(a) * len(b))


def brute_delong(a, b):
    m, n = len(a), len(b)
    psi = lambda x, y: 1.0 if x > y else 0.5 if x == y else 0.0
    v10 = [sum(psi(x, y) for y in b) / n for x in a]
    v01 = [sum(psi(x, y) for x in a) / m for y in b]
    auc = sum(v10) / m
    s10 = sum((v - auc) ** 2 for v in v10) / (m - 1)
    s01 = sum((v - auc) ** 2 for v in v01) / (n - 1)
    return math.sqrt(s10 / m + s01 / n)


def main():
    out = {}
    out["noise"] = []
    for i, (coord, sg) in enumerate([(0, 1.0), (1, 1.0), (7, 2.5), (383, 0.1), (2**40, 13.0)]):
        seed = sha(b"oracle-seed-%d" % i)
        rec = sha(b"oracle-record-%d" % i)
        out["noise"].append({"seed": seed.hex(), "record": rec.hex(), "coordinate": coord,
                             "sigma": sg, "value": noise(seed, rec, coord, sg)})

    out["merkle"] = [{"n": n, "root": mth([b"leaf-%d" % i for i in range(n)]).hex()}
                     for n in list(range(0, 18)) + [31, 32, 33, 100, 257]]

    out["sigma"] = [{"eps_acc": e, "delta_acc": d, "n": n, "gap": g, "sigma": sigma(e, d, n, g)}
                    for e, d, n, g in [(1, 1e-6, 10000, 1), (4, 1e-6, 10000, 1), (0.5, 1e-5, 200, 0.3),
                                       (16, 1e-6, 200, 1), (2, 1e-8, 1, 1)]]

    out["epsilon_audit"] = [{"eps_acc": e, "delta_acc": d, "n": n, "k_max": k, "delta_policy": p,
                             "headline": math.sqrt(k) * e, "full": eps_audit_full(e, d, n, k, p)}
                            for e, d, n, k, p in [(1, 1e-6, 10000, 10, 1e-4), (1, 1e-6, 10000, 50, 1e-3),
                                                  (2, 1e-6, 10000, 50, 1e-3), (1, 1e-6, 10000, 100, 1e-3),
                                                  (0.5, 1e-7, 1000, 3, 1e-5), (4, 1e-6, 10000, 20, 1e-4)]]

    out["auc_prediction"] = [{"eps_acc": e, "delta_acc": 1e-6, "n": 10000, "k": k, "auc": auc_pred(e, 1e-6, 10000, k)}
                             for e in (1, 2, 4) for k in (1, 2, 5, 10, 20)]

    rng = random.Random(20240601)
    out["auc"] = []
    for m, n, ties in [(5, 7, False), (30, 25, False), (40, 40, True), (3, 2, True)]:
        if ties:
            a = [float(rng.randint(0, 6)) for _ in range(m)]
            b = [float(rng.randint(0, 5)) for _ in range(n)]
        else:
            a = [rng.gauss(0.4, 1) for _ in range(m)]
            b = [rng.gauss(0, 1) for _ in range(n)]
        out["auc"].append({"in": a, "out": b, "auc": brute_auc(a, b), "delong_se": brute_delong(a, b)})

    out["ks"] = []
    for m, n in [(50, 60), (200, 150)]:
        a = [rng.gauss(0, 1) for _ in range(m)]
        b = [rng.gauss(0.3, 1.2) for _ in range(n)]
        out["ks"].append({"a": a, "b": b, "statistic": float(stats.ks_2samp(a, b).statistic)})

    out["sample_size"] = [{"beta": b, "eta": e, "s": math.ceil(math.log(1 / e) / b)}
                          for b, e in [(0.01, 2.0 ** -20), (0.05, 1e-3), (0.5, 0.5), (0.001, 1e-9)]]

    out["rdp_closed_form"] = [{"gap": g, "sigma": s, "m": m, "delta": d,
                               "eps": g * math.sqrt(2 * m * math.log(1 / d)) / s + m * g * g / (2 * s * s)}
                              for g, s, m, d in [(1, 100, 1e4, 1e-6), (0.5, 10, 20, 1e-5), (1, 1e3, 2e5, 1e-3)]]

    path = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "data", "oracle.json")
    with open(path, "w") as f:
        json.dump(out, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
