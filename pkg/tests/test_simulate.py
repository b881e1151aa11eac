import numpy as np
import pytest
from numpy.testing import assert_allclose

from dasdoa.arrays import uniform_line_array, steering_matrix
from dasdoa.errors import ConfigError, UnsupportedModelError
from dasdoa.simulate import NoiseModel, SnapshotMatrix, SourceSpec, \
    generate_noise, generate_sources, harmonic_lines, measure_snr, \
    propeller_waveform, random_noise_diagonal, sample_sas, synthesize

TABLE_DIAG = (12, 2.3, 20.5, 5.5, 11.1, 6.5, 2, 13.5, 0.8, 1.7, 13.6, 5.2)
# mean per-element SNR of a unit-power signal under TABLE_DIAG, frozen from
# the closed form 10*log10((1/M) sum 1/sigma_m^2) before implementation
TABLE_DIAG_SNR_DB = -5.144208


def test_sample_sas_alpha2_is_gaussian():
    # alpha = 2 degenerates to N(0, 2*gamma^2)
    x = sample_sas(2.0, 0.0, 1.0, 0.0, 200_000, np.random.default_rng(0))
    assert np.var(x) == pytest.approx(2.0, rel=0.02)
    assert np.mean(x) == pytest.approx(0.0, abs=0.02)


def test_sample_sas_alpha1_is_cauchy():
    # alpha = 1, beta = 0: Cauchy with quartiles at delta +/- gamma
    x = sample_sas(1.0, 0.0, 2.0, 5.0, 200_000, np.random.default_rng(1))
    q1, q2, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    assert q2 == pytest.approx(5.0, abs=0.05)
    assert q3 - q1 == pytest.approx(4.0, rel=0.03)


def test_sample_sas_skewed_branch_runs():
    x = sample_sas(1.5, 0.7, 1.0, 0.0, 5000, np.random.default_rng(2))
    assert np.all(np.isfinite(x))
    # positive skew pushes the upper tail out further than the lower
    assert np.quantile(x, 0.99) > -np.quantile(x, 0.01)


def test_sample_sas_validation():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigError):
        sample_sas(2.5, 0.0, 1.0, 0.0, 10, rng)
    with pytest.raises(ConfigError):
        sample_sas(1.2, 2.0, 1.0, 0.0, 10, rng)
    with pytest.raises(ConfigError):
        sample_sas(1.2, 0.0, -1.0, 0.0, 10, rng)


def test_generate_noise_variances():
    rng = np.random.default_rng(4)
    e = generate_noise(NoiseModel("uniform-gaussian", sigma2=3.0), 4, 50_000, rng)
    assert_allclose(np.mean(np.abs(e) ** 2), 3.0, rtol=0.03)

    model = NoiseModel("nonuniform-gaussian", diag=(1.0, 4.0, 9.0))
    e = generate_noise(model, 3, 50_000, np.random.default_rng(5))
    assert_allclose(np.mean(np.abs(e) ** 2, axis=1), [1.0, 4.0, 9.0], rtol=0.05)


def test_generate_noise_diag_size_mismatch():
    model = NoiseModel("nonuniform-gaussian", diag=(1.0, 2.0))
    with pytest.raises(ConfigError):
        generate_noise(model, 3, 10, np.random.default_rng(0))


def test_measure_snr_uniform_and_nonuniform():
    assert measure_snr(1.0, NoiseModel("uniform-gaussian", sigma2=10.0)) == \
        pytest.approx(-10.0)
    model = NoiseModel("nonuniform-gaussian", diag=TABLE_DIAG)
    assert measure_snr(1.0, model) == pytest.approx(TABLE_DIAG_SNR_DB, abs=1e-6)


def test_measure_snr_rejects_impulsive():
    with pytest.raises(UnsupportedModelError):
        measure_snr(1.0, NoiseModel("impulsive-sas", alpha=1.2))


def test_harmonic_lines_band_filtering():
    lines = harmonic_lines(90.0, (100.0, 1000.0))
    freqs = [f for f, _ in lines]
    assert freqs[0] == 180.0 and freqs[-1] == 990.0
    assert all(f % 90 == 0 for f in freqs)
    lines = harmonic_lines(100.0, (100.0, 1000.0), level_db=6.0)
    assert len(lines) == 10 and lines[0] == (100.0, 6.0)


def test_propeller_waveform_unit_power_and_band():
    fs, n = 5120.0, 20480
    band = (100.0, 1000.0)
    x = propeller_waveform(n, fs, band, harmonic_lines(100.0, band),
                           np.random.default_rng(6))
    assert np.mean(x ** 2) == pytest.approx(1.0, abs=1e-12)
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(n, 1 / fs)
    inside = spec[(f >= 80) & (f <= 1100)].sum()
    outside = spec[(f < 80) | (f > 1100)].sum()
    assert outside < 1e-3 * inside
    # the 100 Hz line towers over the continuum next to it
    line = spec[np.argmin(np.abs(f - 100.0))]
    floor = np.median(spec[(f > 110) & (f < 140)])
    assert line > 30 * floor


def test_propeller_waveform_rejects_band_beyond_nyquist():
    with pytest.raises(ConfigError):
        propeller_waveform(1024, 1000.0, (100.0, 600.0), (),
                           np.random.default_rng(0))


def test_generate_sources_tonal_phase_progression():
    spec = SourceSpec("tonal", (0.0,), (4.0,), freqs=(1500.0,),
                      snapshot_rate=6000.0)
    s = generate_sources(spec, 16, np.random.default_rng(7))
    assert s.shape == (1, 16)
    assert_allclose(np.abs(s), 2.0, atol=1e-12)          # sqrt(power)
    ratio = s[0, 1:] / s[0, :-1]
    assert_allclose(ratio, np.exp(2j * np.pi * 1500.0 / 6000.0), atol=1e-12)


def test_synthesize_tonal_clean_is_steered_sources():
    geom = uniform_line_array(4, spacing=0.25)
    spec = SourceSpec("tonal", (10.0, -35.0), (1.0, 2.0),
                      freqs=(3000.0, 3100.0), snapshot_rate=6000.0)
    rng = np.random.default_rng(8)
    block = synthesize(geom, spec, None, None, 32, rng,
                       dictionary_frequency=3000.0)
    assert block.domain == "narrowband-snapshot"
    # reproduce: the source stream comes from the first spawned child
    src_rng = np.random.default_rng(8).spawn(2)[0]
    s = generate_sources(spec, 32, src_rng)
    A = steering_matrix(geom, 3000.0, np.array([10.0, -35.0]))
    assert_allclose(block.data, A @ s, atol=1e-12)


def test_synthesize_gaussian_snr_is_calibrated():
    geom = uniform_line_array(6, spacing=0.25)
    spec = SourceSpec("tonal", (5.0,), (1.0,), freqs=(3000.0,),
                      snapshot_rate=6000.0)
    model = NoiseModel("nonuniform-gaussian", diag=(1.0, 2.0, 3.0, 4.0, 5.0, 6.0))
    target = 3.0
    clean = synthesize(geom, spec, None, None, 20_000, np.random.default_rng(9),
                       dictionary_frequency=3000.0)
    noisy = synthesize(geom, spec, model, target, 20_000, np.random.default_rng(9),
                       dictionary_frequency=3000.0)
    e = noisy.data - clean.data                      # same spawned source stream
    p_y = np.mean(np.abs(clean.data) ** 2)
    diag = np.mean(np.abs(e) ** 2, axis=1)
    snr = 10 * np.log10(p_y / diag.size * np.sum(1.0 / diag))
    assert snr == pytest.approx(target, abs=0.05)


def test_synthesize_impulsive_scales_signal_not_noise():
    geom = uniform_line_array(4, spacing=0.25)
    spec = SourceSpec("tonal", (0.0,), (1.0,), freqs=(3000.0,),
                      snapshot_rate=6000.0)
    model = NoiseModel("impulsive-sas", alpha=1.2, gamma=1.0)
    rng = np.random.default_rng(10)
    block = synthesize(geom, spec, model, 0.0, 400, rng,
                       dictionary_frequency=3000.0)
    # at 0 dB the realized signal power matches the realized noise power;
    # reconstruct the noise from the same seed to check the convention
    noise_rng = np.random.default_rng(10).spawn(2)[1]
    e = generate_noise(model, 4, 400, noise_rng)
    x = block.data - e
    assert np.mean(np.abs(x) ** 2) == pytest.approx(np.mean(np.abs(e) ** 2),
                                                    rel=1e-10)


def test_synthesize_time_domain_impulsive_unsupported():
    geom = uniform_line_array(4, spacing=1.25)
    spec = SourceSpec("propeller-broadband", (10.0,), (1.0,),
                      snapshot_rate=5120.0, band=(100.0, 1000.0),
                      lines=(harmonic_lines(100.0, (100.0, 1000.0)),))
    with pytest.raises(UnsupportedModelError):
        synthesize(geom, spec, NoiseModel("impulsive-sas"), 0.0, 1024,
                   np.random.default_rng(0))


def test_synthesize_propeller_time_domain():
    geom = uniform_line_array(4, spacing=1.25)
    band = (100.0, 1000.0)
    spec = SourceSpec("propeller-broadband", (10.0,), (1.0,),
                      snapshot_rate=5120.0, band=band,
                      lines=(harmonic_lines(100.0, band),))
    block = synthesize(geom, spec, NoiseModel("uniform-gaussian"), 10.0,
                       2048, np.random.default_rng(11))
    assert block.domain == "time"
    assert not np.iscomplexobj(block.data)
    assert block.data.shape == (4, 2048)


def test_tonal_needs_dictionary_frequency():
    geom = uniform_line_array(4, spacing=0.25)
    spec = SourceSpec("tonal", (0.0,), (1.0,), freqs=(3000.0,),
                      snapshot_rate=6000.0)
    with pytest.raises(ConfigError):
        synthesize(geom, spec, None, None, 16, np.random.default_rng(0))


def test_snapshot_matrix_validation():
    with pytest.raises(ConfigError):
        SnapshotMatrix(np.ones((1, 5)), "time")
    with pytest.raises(ConfigError):
        SnapshotMatrix(np.full((3, 4), np.nan), "time")


def test_source_spec_validation():
    with pytest.raises(ConfigError):
        SourceSpec("tonal", (0.0, 5.0), (1.0,), freqs=(1.0, 2.0))   # power count
    with pytest.raises(ConfigError):
        SourceSpec("tonal", (0.0,), (1.0,), freqs=())               # missing freq
    with pytest.raises(ConfigError):
        SourceSpec("whistle", (0.0,), (1.0,))                       # unknown kind


def test_noise_model_validation():
    with pytest.raises(ConfigError):
        NoiseModel("uniform-gaussian", sigma2=-1.0)
    with pytest.raises(ConfigError):
        NoiseModel("impulsive-sas", alpha=0.0)
    with pytest.raises(ConfigError):
        NoiseModel("purple")


def test_random_noise_diagonal_range():
    d = random_noise_diagonal(64, np.random.default_rng(12))
    assert d.shape == (64,)
    assert np.all(d >= 0.5) and np.all(d <= 25.5)
