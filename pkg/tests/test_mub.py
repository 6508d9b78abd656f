import numpy as np
import pytest

from distincompat.incompat import certificate_objective, certificate_violation, is_jointly_measurable
from distincompat.mub import (analytic_incompatibility, build_mub, closed_form_valid, compute_T, eigenbasis,
                              is_prime, mub_dual_certificate, shift_clock, white_noise_robustness)

SQ2, SQ3, SQ5 = np.sqrt(2), np.sqrt(3), np.sqrt(5)

# closed forms for T = max_lam ||sum_x Pi_{lam(x)|x}||_inf, worked out by hand
T_ORACLE = {(2, 2): 1 + 1 / SQ2, (2, 3): (3 + SQ3) / 2, (3, 2): 1 + 1 / SQ3, (3, 4): (3 + SQ5) / 2}


@pytest.mark.parametrize("d", [2, 3, 5, 7])
def test_full_family_is_mutually_unbiased(d):
    fam = build_mub(d, d + 1)
    assert fam.max_overlap_error() < 1e-12


def test_ordering_and_phases():
    fam = build_mub(3, 3)
    X, Z = shift_clock(3)
    assert np.allclose(fam.bases[1], np.eye(3))
    for b in fam.bases:
        first = b[np.argmax(np.abs(b) > 1e-12, axis=0), np.arange(3)]
        assert np.allclose(first.imag, 0) and np.all(first.real > 0)
    # first basis diagonalizes X with phases in increasing order
    vals = np.array([(fam.bases[0][:, a].conj() @ X @ fam.bases[0][:, a]) for a in range(3)])
    assert np.all(np.diff(np.mod(np.angle(vals) + 1e-12, 2 * np.pi)) > 0)


def test_eigenbasis_of_diagonal_unitary():
    U = np.diag(np.exp(1j * np.array([0.3, 0.1, 2.0])))
    B = eigenbasis(U)
    assert np.allclose(np.abs(B), np.eye(3)[:, [1, 0, 2]])


def test_bad_inputs():
    with pytest.raises(ValueError):
        build_mub(4, 2)
    with pytest.raises(ValueError):
        build_mub(3, 5)
    assert not is_prime(1) and is_prime(13)


@pytest.mark.parametrize("dm", sorted(T_ORACLE))
def test_T_oracle(dm):
    d, m = dm
    assert abs(compute_T(build_mub(d, m)) - T_ORACLE[dm]) < 1e-12


def test_robustness_oracles():
    assert abs(white_noise_robustness(build_mub(2, 2)).eta_star - 1 / SQ2) < 1e-12
    assert abs(white_noise_robustness(build_mub(2, 3)).eta_star - 1 / SQ3) < 1e-12
    assert abs(white_noise_robustness(build_mub(3, 2)).eta_star - 0.5 * (1 + 1 / (1 + SQ3))) < 1e-12


@pytest.mark.parametrize("dm", [(2, 2), (2, 3), (3, 2), (3, 3), (3, 4)])
def test_robustness_is_the_jm_boundary(dm):
    # second route: the joint measurability program flips at eta*
    fam = build_mub(*dm)
    eta = white_noise_robustness(fam).eta_star
    assert is_jointly_measurable(fam.assemblage(eta - 1e-4))
    assert not is_jointly_measurable(fam.assemblage(eta + 1e-4))


def test_heuristic_flag(caplog):
    assert not closed_form_valid(5, 3)
    fam = build_mub(5, 3)
    rob = white_noise_robustness(fam)
    assert rob.heuristic
    assert "heuristic" in caplog.text
    with pytest.raises(ValueError):
        analytic_incompatibility(fam, 1.0)
    assert analytic_incompatibility(fam, 1.0, allow_heuristic=True) > 0


def test_analytic_formula_regimes():
    fam = build_mub(2, 3)
    assert analytic_incompatibility(fam, 0.5) == 0.0
    assert abs(analytic_incompatibility(fam, 1.0) - 0.5 * (1 - 1 / SQ3)) < 1e-12


@pytest.mark.parametrize("dm", [(2, 2), (2, 3), (3, 3)])
@pytest.mark.parametrize("eta", [1.0, 0.85])
def test_closed_form_certificate(dm, eta):
    fam = build_mub(*dm)
    cert, value = mub_dual_certificate(fam, eta)
    M = fam.assemblage(eta)
    assert certificate_violation(M, cert) < 1e-12
    assert abs(certificate_objective(M, cert) - value) < 1e-12
