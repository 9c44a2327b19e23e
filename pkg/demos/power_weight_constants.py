"""How ``[w_delta]_{A_{p,q}}`` blows up as ``delta -> 0``, and how cube families compare."""

from __future__ import annotations

import numpy as np

from fraclab.experiments import weight_constant
from fraclab.weights import ExponentTriple, Weight, duality_identities, power_family


def main():
    e = ExponentTriple(1, 4 / 3, 4.0, 0.5)
    print("delta    all        dyadic     thirds     all * delta^(q/p')")
    for d in (0.4, 0.2, 0.1, 0.05, 0.025):
        w = Weight.power((e.n - d) / e.p_dual)
        vals = [weight_constant(w, e, fam) for fam in ("all", "dyadic", "thirds")]
        print(f"{d:<8g} " + " ".join(f"{v:10.4f}" for v in vals) + f" {vals[0] * d ** (e.q / e.p_dual):10.4f}")

    w = Weight.power(0.2)
    fam = power_family("thirds", 1)
    errs = duality_identities(w, e, fam).errors
    print("duality identity errors for |x|^0.2:", np.array(errs))


if __name__ == "__main__":
    main()
