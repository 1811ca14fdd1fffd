"""Smoke test for the zipper_maps extension: python smoke_test.py"""
import json
from fractions import Fraction

import zipper_maps as zm

p = zm.Parameter("3/10,7/10,4/5,1/10")
d = json.loads(p.derived())
assert d["lambda_min"] == "6/5" and d["in_region_b"] and not d["symmetric"]

lo, hi = p.eval("3/10")
assert Fraction(lo) == Fraction(hi) == Fraction(7, 10)
lo, hi = p.eval("1/3", "2^-20")
assert 0 < Fraction(hi) - Fraction(lo) <= Fraction(1, 2**20)

(i_lo, i_hi), (j_lo, j_hi) = p.tile("01")
assert Fraction(i_hi) - Fraction(i_lo) == Fraction(3, 10) * Fraction(1, 2)

beta = json.loads(p.regularity())["beta"]
assert Fraction(beta["lo"]) < Fraction("0.886718") and Fraction(beta["hi"]) > Fraction("0.886717")

cert = zm.search(p, 3)
assert cert.order >= 3 and cert.verify()[0]
again = zm.HorseshoeCertificate.from_json(cert.to_json())
assert again.words == cert.words

r = json.loads(zm.realize_order(p, 1, 1, [(0, 1), (0, 0)]))
assert len(r["points"]) == 1
e = json.loads(zm.embed(p, [1, 2, 0], "2^-10"))
assert len(e["enclosures"]) == 3

rows = json.loads(zm.mdim_table(p, ["2^-6"]))
assert abs(float(Fraction(rows[0]["ratio"]["lo"])) - 0.397673) < 1e-5

s = zm.SequenceSpec.choose(p, 6)
assert s.exponents[0] == 170 and s.gaps_hold() and s.modulus_holds()
csv, ok = s.cover("1/40")
assert ok and csv.startswith("class_k,count")
_, ratio = s.conjugated_rate(p, "1/20")
assert 0 < ratio < 1.1
assert len(zm.SequenceSpec.from_exponents([12, 25]).homeo(2)) == 17

print("python smoke test: ok")
