"""The sampled pair-correlation error and its predicted law.

For Ising couplings the sampled sigma^+ sigma^+/- pair functions equal
the exact ones times cos^2(2 t J_ij), so the relative deviation of
C^yy is |1 - cos^2(2 t J_ij)| up to Monte-Carlo noise. This script
measures that deviation on a 1x16 chain and prints it next to the
prediction.
"""

import numpy as np

import dtwa_quench as dq


def main():
    lattice = dq.build_lattice(1, 16)
    reference = dq.center_site(lattice)
    partners = dq.axis_partners(lattice, reference, "y", j_max=4)
    times = np.arange(0.1, 0.51, 0.1)
    couplings = dq.coupling_matrix(lattice, "ising", J=1.0, alpha=2.0)

    run = dq.RunConfig(
        n_t=20_000,
        master_seed=8,
        sample_times=times,
        correlations=dq.CorrelationRequest(
            reference=reference, axis="y", partners=partners, components=("yy",)
        ),
    )
    res = dq.run_dtwa(run, couplings)
    field = res.fields["yy"]

    print(f"{'tJ':>5} {'j':>3} {'observed':>9} {'predicted':>10} {'noise':>7}")
    for jidx, site_j in enumerate(partners):
        _, c_yy = dq.ising_connected(couplings, reference, site_j, times)
        law = dq.dtwa_error_prediction(couplings, reference, site_j, times)
        observed = dq.relative_deviation(field.values[:, jidx], c_yy)
        noise = field.stderr[:, jidx] / np.abs(c_yy)
        for k in range(len(times)):
            print(
                f"{times[k]:5.2f} {jidx + 1:3d} {observed[k]:9.4f} "
                f"{law[k]:10.4f} {noise[k]:7.4f}"
            )


if __name__ == "__main__":
    main()
