"""Model assembly: config validation, parameter prediction, receptive field,
deterministic construction, and serialization round-trips."""
import numpy as np
import pytest

import tempconv as tc
from tempconv import Tensor
from tempconv.complexity import audit, count_params
from tempconv.errors import ConfigError, ShapeError
from tempconv.model import PARAM_BUDGET_CAP, predict_param_count, receptive_field


def cfg(text, overrides=()):
    return tc.parse_config(text, overrides)

TCN_ONLY = "[model]\nfrontend = false\n"


class TestConfigValidation:
    def test_defaults(self):
        c = cfg("")
        assert c.tcn.stages == 4
        assert c.tcn.channels == (512,) * 4
        assert c.tcn.kernel == 3
        assert c.tcn.dropout == 0.2
        assert c.classifier.num_classes == 500
        assert c.extractor is not None

    def test_stage_floor(self):
        with pytest.raises(ConfigError, match="stages must be ≥ 1"):
            cfg("[tcn]\nstages = 0\n")

    def test_channel_list_length(self):
        c = cfg("[tcn]\nstages = 3\nchannels = 64, 128, 256\n")
        assert c.tcn.channels == (64, 128, 256)
        with pytest.raises(ConfigError):
            cfg("[tcn]\nstages = 3\nchannels = 64, 128\n")

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            cfg("[tcn]\nkernel = 4\n")

    def test_unknown_section_and_key(self):
        with pytest.raises(ConfigError):
            cfg("[optimizer]\nlr = 1\n")
        with pytest.raises(ConfigError):
            cfg("[tcn]\nwidth = 64\n")

    def test_frontendless_rejects_stem_section(self):
        with pytest.raises(ConfigError):
            cfg("[model]\nfrontend = false\n[stem]\nout_channels = 16\n")

    def test_fractional_expansion_must_hit_whole_width(self):
        with pytest.raises(ConfigError):
            cfg("[tcn]\nblock_kind = uib\nchannels = 10\nexpansion = 3.37\n")

    def test_set_overrides(self):
        c = cfg("[tcn]\nstages = 4\n", overrides=["tcn.stages=2", "tcn.channels=32"])
        assert c.tcn.stages == 2 and c.tcn.channels == (32, 32)

    def test_bad_override_value(self):
        with pytest.raises(ConfigError):
            cfg("", overrides=["tcn.stages=soon"])


class TestParamPrediction:
    @pytest.mark.parametrize("kind", ["baseline", "linear", "fusedmb",
                                      "invertedresidual", "cib", "uib", "starv"])
    def test_closed_form_matches_built_model(self, kind):
        c = cfg(TCN_ONLY + f"[tcn]\nblock_kind = {kind}\nchannels = 64\nstages = 3\n")
        model = tc.build_model(c, init=False)
        assert predict_param_count(c) == count_params(model)

    def test_full_model_prediction(self):
        c = cfg("[tcn]\nchannels = 128\nstages = 2\n[classifier]\nnum_classes = 12\n")
        model = tc.build_model(c, init=False)
        assert predict_param_count(c) == count_params(model)

    def test_per_stage_widths_add_transitions(self):
        uniform = cfg(TCN_ONLY + "[tcn]\nstages = 2\nchannels = 64\n")
        mixed = cfg(TCN_ONLY + "[tcn]\nstages = 2\nchannels = 64, 96\n")
        m_uniform = tc.build_model(uniform, init=False)
        m_mixed = tc.build_model(mixed, init=False)
        assert count_params(m_mixed) != count_params(m_uniform)
        assert predict_param_count(mixed) == count_params(m_mixed)

    def test_budget_cap_enforced(self):
        c = cfg(TCN_ONLY + "[tcn]\nchannels = 16384\nstages = 8\n")
        assert predict_param_count(c) > PARAM_BUDGET_CAP
        with pytest.raises(ConfigError, match="budget"):
            tc.build_model(c, init=False)


class TestReceptiveField:
    def test_baseline_formula_values(self):
        # 2 taps/block, kernel 3, dilations 1,2,4,8 -> 1 + 2*2*15 = 61 (+2 stem)
        assert receptive_field(cfg(TCN_ONLY + "[tcn]\nblock_kind = baseline\n")) == 61
        assert receptive_field(cfg("")) == 63

    def test_star_formula_value(self):
        c = cfg(TCN_ONLY + "[tcn]\nblock_kind = starv\n")
        # 2 taps/block, dw kernel 7 -> 1 + 2*6*15 = 181
        assert receptive_field(c) == 181

    @pytest.mark.parametrize("kind,stages", [("baseline", 3), ("cib", 2),
                                             ("fusedmb", 4), ("starv", 2)])
    def test_formula_matches_perturbation(self, kind, stages):
        """Empirical receptive field of the temporal path equals the formula."""
        c = cfg(TCN_ONLY + f"[tcn]\nblock_kind = {kind}\nchannels = 8\nstages = {stages}\n")
        model = tc.build_model(c, seed=0).eval()
        rf = receptive_field(c)
        t_len = rf + 3
        x = np.random.default_rng(1).standard_normal((1, 8, t_len)).astype(np.float32)

        def last_frame(bump_at):
            y = x.copy()
            y[:, :, bump_at] += 1.0
            return model.tcn(Tensor(y)).data[:, :, -1]

        base = model.tcn(Tensor(x)).data[:, :, -1]
        edge = t_len - rf  # first frame the last output can see
        assert not np.array_equal(base, last_frame(edge))
        assert np.array_equal(base, last_frame(edge - 1))


class TestDeterminism:
    def test_same_seed_same_weights(self):
        c = cfg("[tcn]\nchannels = 16\nstages = 2\n[extractor]\nwidths = 8, 16\n")
        a = tc.build_model(c, seed=7)
        b = tc.build_model(c, seed=7)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_different_seed_different_weights(self):
        c = cfg(TCN_ONLY + "[tcn]\nchannels = 16\nstages = 1\n")
        a = tc.build_model(c, seed=0)
        b = tc.build_model(c, seed=1)
        diffs = [not np.array_equal(pa.data, pb.data)
                 for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters())
                 if pa.data.std() > 0]
        assert any(diffs)


class TestStateDictRoundTrip:
    def test_round_trip_bitwise(self):
        c = cfg("[tcn]\nchannels = 16\nstages = 2\n[extractor]\nwidths = 8, 16\n"
                "[classifier]\nnum_classes = 4\n")
        a = tc.build_model(c, seed=3)
        b = tc.build_model(c, seed=99)
        b.load_state_dict(a.state_dict())
        x = Tensor(np.random.default_rng(0).standard_normal((1, 1, 6, 16, 16)).astype(np.float32))
        a.eval(), b.eval()
        np.testing.assert_array_equal(a(x).data, b(x).data)

    def test_missing_key_rejected(self):
        c = cfg(TCN_ONLY + "[tcn]\nchannels = 8\nstages = 1\n")
        model = tc.build_model(c, seed=0)
        state = model.state_dict()
        state.pop(next(iter(state)))
        with pytest.raises(tc.FormatError):
            model.load_state_dict(state)

    def test_shape_mismatch_rejected(self):
        c = cfg(TCN_ONLY + "[tcn]\nchannels = 8\nstages = 1\n")
        model = tc.build_model(c, seed=0)
        state = model.state_dict()
        k = next(iter(state))
        state[k] = np.zeros((1, 2, 3), dtype=np.float32)
        with pytest.raises(ShapeError):
            model.load_state_dict(state)


class TestDescribe:
    def test_describe_mentions_structure(self):
        c = cfg("[tcn]\nblock_kind = starv\nchannels = 32\nstages = 2\n"
                "[extractor]\nwidths = 16, 32\n[classifier]\nnum_classes = 11\n")
        model = tc.build_model(c, init=False)
        text = tc.describe(model)
        assert "starv" in text
        assert "receptive field" in text.lower()
        assert tc.config_hash(c) in text
        assert f"{count_params(model):,}" in text

    def test_describe_deterministic(self):
        c = cfg(TCN_ONLY + "[tcn]\nchannels = 16\n")
        m = tc.build_model(c, init=False)
        assert tc.describe(m) == tc.describe(m)


class TestTrendAcrossDepthWidthGrid:
    def test_params_rise_with_width_and_macs_fall_with_depth(self):
        """Across (stages; channels) = (8;128) (6;256) (4;512) (3;768):
        parameters strictly increase, per-clip MACs strictly decrease the
        other way."""
        grid = [(8, 128), (6, 256), (4, 512), (3, 768)]
        params, macs = [], []
        for stages, ch in grid:
            c = cfg(TCN_ONLY +
                    f"[tcn]\nblock_kind = starv\nstages = {stages}\nchannels = {ch}\n")
            model = tc.build_model(c, init=False)
            rep = audit(model, model.input_shape(frames=29))
            params.append(rep.tcn_params)
            macs.append(rep.tcn_macs)
        assert params[0] < params[1] < params[2]  # (8;128) -> (6;256) -> (4;512)
        assert macs[3] > macs[2] > macs[1] > macs[0]  # (3;768) down to (8;128)
