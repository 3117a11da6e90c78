import numpy as np
import pytest

import flowstrain as fs


def test_warp_with_zero_flow_is_identity():
    rng = np.random.default_rng(0)
    img = rng.random((4, 6, 5))
    out = fs.warp_image(img, np.zeros((4, 6, 5, 3)))
    assert out.shape == img.shape
    np.testing.assert_array_equal(out, img)


def test_uniform_stretch_has_closed_form_strain():
    a = 0.1
    z, y, x = np.meshgrid(np.arange(4), np.arange(5), np.arange(6), indexing="ij")
    flow = np.zeros((4, 5, 6, 3))
    flow[..., 0] = a * x
    E, valid = fs.compute_strain(flow)
    assert E.shape == (4, 5, 6, 3, 3)
    assert valid.all()
    np.testing.assert_allclose(E[..., 0, 0], a + a * a / 2, atol=1e-12)
    np.testing.assert_allclose(E[..., 1, 1], 0.0, atol=1e-12)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(1)
    fixed, moving = rng.random((3, 4, 4)), rng.random((3, 4, 4))
    flow = 0.25 + rng.uniform(-0.2, 0.2, (3, 4, 4, 3))
    loss, grad = fs.loss_and_grad(fixed, moving, flow)
    h = 1e-3
    for idx in [(0, 0, 0, 0), (1, 2, 3, 1), (2, 3, 1, 2)]:
        up, down = flow.copy(), flow.copy()
        up[idx] += h
        down[idx] -= h
        fd = (fs.loss_and_grad(fixed, moving, up)[0] - fs.loss_and_grad(fixed, moving, down)[0]) / (2 * h)
        assert abs(fd - grad[idx]) < 1e-5 * max(1.0, abs(fd))


def test_phantom_registration_improves_overlap():
    p = fs.generate_phantom(shape=[8, 40, 40], alpha=0.05)
    flow, report = fs.register_images(p["fixed"], p["moving"], iterations=60)
    assert flow.shape == (8, 40, 40, 3)
    assert report["kind"] == "register"
    warped_err = np.abs(fs.warp_image(p["moving"], flow) - p["fixed"]).mean()
    assert warped_err < np.abs(p["moving"] - p["fixed"]).mean()


def test_bland_altman_and_costs():
    d = [0.1, 0.4, 0.2, 0.3]
    st = fs.bland_altman(d, [0.0] * 4)
    assert st["n"] == 4
    assert st["mean_diff"] == pytest.approx(np.mean(d))
    assert st["sd_diff"] == pytest.approx(np.std(d, ddof=1))
    costs = fs.count_costs("input 1\nconv 16\noutput", shape=(16, 128, 128))
    assert costs["rows"][1]["macs"] == 16 * 128 * 128 * 16 * 27


def test_errors_map_to_exception_classes():
    with pytest.raises(fs.DataError):
        fs.bland_altman([0.1], [0.0])
    with pytest.raises(fs.NumericalError):
        flat = np.ones((2, 3, 3))
        fs.corrcoef(flat, flat)
    with pytest.raises(fs.DataError):
        fs.warp_image(np.zeros((2, 2)), np.zeros((2, 2, 3)))


def test_cli_entry_point():
    code, out, _ = fs.run_cli(["--help"])
    assert code == 0
    assert "register" in out
