"""Regenerate bmd.csv: a synthetic bone-density population (241 women, two exams)."""
import math
import random

rng = random.Random(20260915)
rows = []
for i in range(241):
    height = rng.gauss(1.61, 0.065)
    weight = max(38.0, rng.gauss(68.0, 13.0))
    bmi = weight / height**2 + rng.gauss(0.0, 0.9)
    age = rng.randint(50, 85)
    latent = -1.6 + 0.035 * (weight - 68.0) + 0.05 * (bmi - 26.0) - 0.03 * (age - 65) + rng.gauss(0.0, 1.0)
    tobmd2 = latent + rng.gauss(0.0, 0.25)
    tobmd1 = tobmd2 + 0.10 + rng.gauss(0.0, 0.30)
    inbmd1 = tobmd2 + rng.gauss(0.0, 0.42)
    common = rng.gauss(0.0, 1.0)
    trbmd1 = 0.55 * latent + 0.8 * common + rng.gauss(0.0, 0.55)
    fnbmd1 = 0.55 * latent + 0.8 * common + rng.gauss(0.0, 0.55)
    rows.append((i + 1, age, weight, bmi, tobmd1, inbmd1, trbmd1, fnbmd1, tobmd2))

with open("bmd.csv", "w") as f:
    f.write("# synthetic bone-density population; regenerate with make_bmd.py\n")
    f.write("id,age,weight,bmi,tobmd1,inbmd1,trbmd1,fnbmd1,tobmd2\n")
    for r in rows:
        f.write("%d,%d,%.1f,%.2f,%.3f,%.3f,%.3f,%.3f,%.3f\n" % r)
