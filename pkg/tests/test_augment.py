import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fundus_screen.augment import (IDENTITY, AugmentPolicy, RngStream, TransformSpec,
                                   apply_transform, rng_for, sample_transform, splitmix64,
                                   tta_set)
from fundus_screen.errors import ParameterError
from fundus_screen.imaging import Image


def random_image(rng, w=12, h=9):
    return Image(rng.integers(0, 256, (h, w, 3), dtype=np.uint8))


def draws(stream, n=100):
    return [stream.next_u64() for _ in range(n)]


def test_splitmix64_reference_values():
    # reference first outputs of SplitMix64 seeded with 0
    state, out = 0, []
    for _ in range(3):
        out.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_rng_same_triple_identical():
    assert draws(rng_for(7, 3, 0)) == draws(rng_for(7, 3, 0))


def test_rng_streams_differ_by_index_and_epoch():
    base = rng_for(7, 3, 0).next_u64()
    assert base != rng_for(7, 4, 0).next_u64()
    assert base != rng_for(7, 3, 1).next_u64()
    assert base != rng_for(8, 3, 0).next_u64()


def test_rng_uniform_range():
    s = rng_for(1, 2, 3)
    u = [s.uniform() for _ in range(10_000)]
    assert min(u) >= 0.0 and max(u) < 1.0
    assert abs(np.mean(u) - 0.5) < 0.02


def test_permutation_is_permutation():
    p = RngStream(99).permutation(50)
    assert sorted(p) == list(range(50))
    assert p != list(range(50))


def test_disabled_policy_gives_identity():
    t = sample_transform(rng_for(1, 1, 1), AugmentPolicy.disabled())
    assert t == IDENTITY and t.is_identity


def test_sampling_is_deterministic():
    pol = AugmentPolicy()
    assert sample_transform(rng_for(5, 0, 2), pol) == sample_transform(rng_for(5, 0, 2), pol)


def test_sampled_parameters_within_ranges():
    pol = AugmentPolicy(rotation_prob=1.0, brightness_prob=1.0, contrast_prob=1.0, zoom_prob=1.0)
    rot, bri, con, zoo = [], [], [], []
    for i in range(10_000):
        t = sample_transform(rng_for(3, i, 0), pol)
        rot.append(t.rotation_deg)
        bri.append(t.brightness)
        con.append(t.contrast)
        zoo.append(t.zoom)
    assert -45 <= min(rot) and max(rot) <= 45
    assert 0.8 <= min(bri) and max(bri) <= 1.2
    assert 0.8 <= min(con) and max(con) <= 1.2
    assert 0.9 <= min(zoo) and max(zoo) <= 1.1
    # the whole range gets used
    assert min(rot) < -40 and max(rot) > 40


def test_family_probabilities_roughly_half():
    pol = AugmentPolicy()
    ts = [sample_transform(rng_for(11, i, 0), pol) for i in range(4000)]
    for frac in (np.mean([t.flip_h for t in ts]), np.mean([t.rotation_deg != 0 for t in ts]),
                 np.mean([t.zoom != 1 for t in ts])):
        assert 0.45 < frac < 0.55


def test_later_families_independent_of_earlier_outcomes():
    # turning flip probabilities to 0 or 1 must not shift the rotation draw
    a = sample_transform(rng_for(4, 4, 4), AugmentPolicy(flip_h_prob=0.0, rotation_prob=1.0))
    b = sample_transform(rng_for(4, 4, 4), AugmentPolicy(flip_h_prob=1.0, rotation_prob=1.0))
    assert a.rotation_deg == b.rotation_deg


@pytest.mark.parametrize("bad", [dict(rotation_range=(10.0, -10.0)), dict(zoom_prob=1.5),
                                 dict(brightness_range=(0.0, 1.0)), dict(tta_views=("spin",))])
def test_policy_validation(bad):
    with pytest.raises(ParameterError):
        AugmentPolicy(**bad)


def test_policy_text_roundtrip():
    pol = AugmentPolicy(rotation_range=(-30.0, 20.0), tta_views=("identity", "flip_v"), zoom=False)
    assert AugmentPolicy.from_text(pol.to_text()) == pol


def test_identity_transform_bit_exact(rng):
    img = random_image(rng)
    assert apply_transform(img, IDENTITY) == img


def test_flip_h_pair():
    img = Image(np.array([[[1, 2, 3], [4, 5, 6]]], dtype=np.uint8))
    out = apply_transform(img, TransformSpec(flip_h=True))
    assert out.pixel(0, 0) == (4, 5, 6) and out.pixel(1, 0) == (1, 2, 3)


def test_flips_are_commuting_involutions(rng):
    img = random_image(rng)
    h, v = TransformSpec(flip_h=True), TransformSpec(flip_v=True)
    assert apply_transform(apply_transform(img, h), h) == img
    assert apply_transform(apply_transform(img, v), v) == img
    hv = apply_transform(apply_transform(img, h), v)
    assert hv == apply_transform(apply_transform(img, v), h)
    assert apply_transform(img, TransformSpec(flip_h=True, flip_v=True)) == \
        apply_transform(apply_transform(img, h), v)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 15), st.integers(1, 15), st.booleans(), st.booleans(),
       st.floats(-45, 45), st.floats(0.5, 1.5), st.floats(0.5, 1.5), st.floats(0.5, 2.0))
def test_dimensions_preserved(w, h, fh, fv, rot, b, c, z):
    img = Image(np.full((h, w, 3), 100, dtype=np.uint8))
    out = apply_transform(img, TransformSpec(fh, fv, rot, b, c, z))
    assert (out.width, out.height) == (w, h)


def test_rotation_fills_corners_black():
    img = Image.filled(21, 21, (200, 200, 200))
    out = apply_transform(img, TransformSpec(rotation_deg=45.0))
    assert out.pixel(0, 0) == (0, 0, 0)
    assert out.pixel(10, 10) == (200, 200, 200)


def test_rotation_about_center_keeps_center_pixel(rng):
    img = random_image(rng, 9, 9)
    out = apply_transform(img, TransformSpec(rotation_deg=33.0))
    assert out.pixel(4, 4) == img.pixel(4, 4)


def test_zoom_out_adds_black_border_zoom_in_crops():
    img = Image.filled(20, 20, (150, 150, 150))
    small = apply_transform(img, TransformSpec(zoom=0.5))
    assert small.pixel(0, 0) == (0, 0, 0) and small.pixel(10, 10) == (150, 150, 150)
    big = apply_transform(img, TransformSpec(zoom=2.0))
    assert big == img


def test_brightness_and_contrast_formulas():
    img = Image.filled(2, 2, (100, 200, 10))
    out = apply_transform(img, TransformSpec(brightness=1.5))
    assert out.pixel(0, 0) == (150, 255, 15)
    out = apply_transform(img, TransformSpec(contrast=2.0))
    assert out.pixel(0, 0) == (72, 255, 0)  # (v - 128) * 2 + 128, clamped


def test_apply_backends_agree(rng):
    from fundus_screen import kernels
    img = random_image(rng, 30, 25)
    t = TransformSpec(True, False, 17.0, 1.1, 0.9, 1.05)
    before = kernels.backend()
    try:
        kernels.set_backend("numpy")
        a = apply_transform(img, t)
        kernels.set_backend("numba")
        b = apply_transform(img, t)
    finally:
        kernels.set_backend(before)
    assert a == b


def test_epoch_batch_reproducible(rng):
    imgs = [random_image(rng) for _ in range(6)]
    pol = AugmentPolicy()

    def batch(order):
        return {i: apply_transform(imgs[i], sample_transform(rng_for(9, i, 3), pol)) for i in order}

    assert batch(range(6)) == batch(reversed(range(6)))


def test_tta_default_six_views():
    views = tta_set(AugmentPolicy())
    assert len(views) == 6 and views[0] == IDENTITY
    assert views == tta_set(AugmentPolicy())
    assert TransformSpec(rotation_deg=15.0) in views and TransformSpec(rotation_deg=-15.0) in views


def test_tta_disabled_identity_only():
    assert tta_set(AugmentPolicy(tta=False)) == [IDENTITY]
    assert tta_set(AugmentPolicy(tta_views=("identity",))) == [IDENTITY]
    assert tta_set(AugmentPolicy(tta_views=("flip_v",)))[0] == IDENTITY
