import numpy as np
import pytest

from softwrench.core import Rng, Wrench
from softwrench import dataset
from softwrench.dataset import (EFFORT_MATRIX, EFFORT_OFFSET, Manifest,
                                SequenceEntry, apply_sensor_model,
                                generate_primitive, load_manifest,
                                load_sequence, save_manifest, save_sequence,
                                simulate_efforts, split_by_environment,
                                synchronize, tare)
from softwrench.render import CameraModel

CAM = CameraModel()


class TestSensorModel:
    def test_zero_noise_zero_output(self):
        raw = np.zeros((50, 6))
        out = apply_sensor_model(raw, Rng(1), noise_f=0, noise_t=0,
                                 drift_f=0, drift_t=0)
        assert np.array_equal(out, raw)

    def test_drift_variance_grows_linearly(self):
        # Random-walk oracle: Var[drift_k] = k * step_std^2.
        n, reruns = 200, 1000
        acc = np.zeros((reruns, n))
        for r in range(reruns):
            out = apply_sensor_model(np.zeros((n, 6)), Rng(r), noise_f=0,
                                     noise_t=0, drift_f=0.002, drift_t=0)
            acc[r] = out[:, 0]
        var = acc.var(axis=0)
        ks = np.array([50, 100, 199])
        expected = ks * 0.002 ** 2
        assert np.all(np.abs(var[ks] - expected) <= 0.2 * expected)

    def test_white_noise_mean_near_zero(self):
        n = 10_000
        out = apply_sensor_model(np.zeros((n, 6)), Rng(3), noise_f=0.05,
                                 noise_t=0.005, drift_f=0, drift_t=0)
        assert abs(out[:, 0].mean()) <= 3 * 0.05 / np.sqrt(n)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            apply_sensor_model(np.zeros((0, 6)), Rng(0))


class TestTare:
    def test_constant_stream_becomes_zero(self):
        c = np.tile([1, 2, 3, 4, 5, 6], (10, 1)).astype(float)
        assert np.array_equal(tare(c), np.zeros((10, 6)))

    def test_idempotent(self):
        s = Rng(2).gen.normal(size=(20, 6))
        assert np.array_equal(tare(tare(s)), tare(s))

    def test_offset_pair(self):
        w0 = np.array([1, 1, 1, 0, 0, 0], dtype=float)
        delta = np.array([0, 0.5, 0, 0.1, 0, 0], dtype=float)
        out = tare(np.stack([w0, w0 + delta]))
        assert np.array_equal(out[0], np.zeros(6))
        assert np.allclose(out[1], delta)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            tare(np.zeros((0, 6)))


class TestSynchronize:
    def test_equal_rate_identity(self):
        t = np.arange(10) * 0.1
        pairs = synchronize(t, t)
        assert pairs == [(i, i) for i in range(10)]

    def test_tie_break_earlier(self):
        pairs = synchronize([0.10], [0.09, 0.11], image_period=0.1)
        assert pairs == [(0, 0)]

    def test_30hz_images_100hz_wrenches(self):
        img = np.arange(0, 3.0, 1 / 30)
        wr = np.arange(0, 3.0, 1 / 100)
        pairs = synchronize(img, wr)
        assert len(pairs) == len(img)
        err = max(abs(wr[j] - img[i]) for i, j in pairs)
        assert err <= 0.005 + 1e-12
        # Exhaustive check against brute-force nearest neighbor.
        for i, j in pairs:
            best = np.argmin(np.abs(wr - img[i]))
            assert abs(wr[j] - img[i]) <= abs(wr[best] - img[i]) + 1e-15

    def test_far_images_dropped(self):
        pairs = synchronize([0.0, 5.0], [0.0, 0.1], image_period=5.0)
        assert pairs == [(0, 0), (1, 1)]
        pairs = synchronize([0.0, 5.0], [0.0, 0.1], image_period=0.2)
        assert pairs == [(0, 0)]

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            synchronize([], [0.0])


class TestEfforts:
    def test_zero_wrench_zero_noise_gives_offset(self):
        e = simulate_efforts(Wrench.zero(), Rng(0), noise=0.0)
        assert np.array_equal(e, EFFORT_OFFSET)

    def test_affine_in_wrench(self):
        w1 = Wrench([1, 2, 3], [0.1, 0.2, 0.3])
        w2 = Wrench([-2, 1, 0], [0.0, -0.1, 0.2])
        e1 = simulate_efforts(w1, Rng(0), noise=0.0) - EFFORT_OFFSET
        e2 = simulate_efforts(w2, Rng(0), noise=0.0) - EFFORT_OFFSET
        w12 = Wrench(w1.force + w2.force, w1.torque + w2.torque)
        e12 = simulate_efforts(w12, Rng(0), noise=0.0) - EFFORT_OFFSET
        assert np.allclose(e12, e1 + e2, atol=1e-12)

    def test_rank_five_by_elimination(self):
        # Row-reduction oracle, independent of numpy's rank routines.
        m = EFFORT_MATRIX.copy()
        rank = 0
        for col in range(6):
            rows = np.flatnonzero(np.abs(m[rank:, col]) > 1e-9)
            if rows.size == 0:
                continue
            pivot = rank + rows[0]
            m[[rank, pivot]] = m[[pivot, rank]]
            m[rank] = m[rank] / m[rank, col]
            for r in range(6):
                if r != rank:
                    m[r] -= m[r, col] * m[rank]
            rank += 1
        assert rank == 5

    def test_kernel_is_lateral_force(self):
        assert np.allclose(EFFORT_MATRIX @ np.array([0, 1, 0, 0, 0, 0]), 0.0)
        assert np.linalg.norm(EFFORT_MATRIX @ np.array([1, 0, 0, 0, 0, 0])) > 0.1

    def test_quantization(self):
        e = simulate_efforts(Wrench([1, 2, 3], [0.1, 0, 0]), Rng(5), noise=0.3,
                             quantum=0.25)
        assert np.allclose(np.round(e / 0.25) * 0.25, e, atol=1e-12)


class TestSplit:
    def _manifest(self):
        entries = [SequenceEntry(f"seq_{i:04d}", "push", env, 10, i)
                   for i, env in enumerate(["lab", "office1", "office2", "home"] * 2)]
        return Manifest(root="/none", version=1, gripper_kind="tendon_actuated",
                        image_rate_hz=10, wrench_rate_hz=100, entries=entries)

    def test_holdout_partition(self):
        m = self._manifest()
        train, test = split_by_environment(m, "home")
        assert set(e.env_id for e in train.entries) == {"lab", "office1", "office2"}
        assert all(e.env_id == "home" for e in test.entries)
        ids = lambda mm: {e.seq_id for e in mm.entries}
        assert ids(train) | ids(test) == ids(m)
        assert ids(train) & ids(test) == set()

    def test_unknown_env_raises(self):
        with pytest.raises(ValueError):
            split_by_environment(self._manifest(), "garage")


class TestGeneratePrimitive:
    def test_frame_count_and_timestamps(self):
        seq = generate_primitive("push", "lab", "tendon_actuated", CAM, Rng(11),
                                 duration=5.0, rate=10.0)
        assert len(seq.frames) == 50
        ts = [f.timestamp for f in seq.frames]
        assert all(b > a for a, b in zip(ts, ts[1:]))

    def test_first_frame_tared_to_zero(self):
        seq = generate_primitive("grasp", "office1", "tendon_actuated", CAM,
                                 Rng(12), duration=4.0, rate=10.0)
        assert np.array_equal(seq.frames[0].wrench.as_array(), np.zeros(6))

    def test_same_seed_identical_bytes(self, tmp_path):
        for name in ("a", "b"):
            seq = generate_primitive("slide", "lab", "tendon_actuated", CAM,
                                     Rng(13), duration=3.0, rate=10.0)
            save_sequence(tmp_path / name, "seq_0000", seq)
        fa = (tmp_path / "a/seqs/seq_0000/frames.csv").read_bytes()
        fb = (tmp_path / "b/seqs/seq_0000/frames.csv").read_bytes()
        assert fa == fb
        ia = (tmp_path / "a/seqs/seq_0000/img/f00010.png").read_bytes()
        ib = (tmp_path / "b/seqs/seq_0000/img/f00010.png").read_bytes()
        assert ia == ib

    def test_push_reaches_target_force(self, monkeypatch):
        # Rollout oracle for the contact regulation: pin the scripted push
        # target at 3 N with a long hold and silence the wrist-tilt gravity
        # disturbance, then the final-quarter mean force magnitude must sit
        # in [2, 4] N (slack comes from contact-solver granularity, sensor
        # noise, and drift).
        orig = dataset._ActivityScript._next_cycle

        def pinned(self):
            orig(self)
            self.target = 3.0
            self.act_time = 30.0
            self.speed = 0.03
        monkeypatch.setattr(dataset._ActivityScript, "_next_cycle", pinned)
        monkeypatch.setattr(dataset._TiltGravity, "step",
                            lambda self: Wrench.zero())
        seq = generate_primitive("push", "lab", "tendon_actuated", CAM, Rng(14),
                                 duration=8.0, rate=10.0)
        tail = [np.linalg.norm(f.wrench.force) for f in seq.frames[60:]]
        assert 2.0 <= float(np.mean(tail)) <= 4.0

    def test_push_exceeds_free_space_force(self):
        seq = generate_primitive("push", "office2", "tendon_actuated", CAM,
                                 Rng(15), duration=6.0, rate=10.0)
        mags = np.array([np.linalg.norm(f.wrench.force) for f in seq.frames])
        free = mags[:8].mean()      # taring window: the script starts in air
        assert mags.mean() > free

    def test_too_short_raises(self):
        with pytest.raises(ValueError):
            generate_primitive("push", "lab", "tendon_actuated", CAM, Rng(0),
                               duration=0.1, rate=10.0)

    def test_unknown_kind_raises(self):
        with pytest.raises(ValueError):
            generate_primitive("pour", "lab", "tendon_actuated", CAM, Rng(0),
                               duration=3.0, rate=10.0)


class TestPersistence:
    def _seq(self):
        return generate_primitive("push", "lab", "tendon_actuated", CAM,
                                  Rng(21), duration=3.0, rate=10.0)

    def test_round_trip(self, tmp_path):
        seq = self._seq()
        entry = save_sequence(tmp_path, "seq_0000", seq)
        manifest = Manifest(root=str(tmp_path), version=1,
                            gripper_kind="tendon_actuated", image_rate_hz=10.0,
                            wrench_rate_hz=100.0, entries=[entry])
        save_manifest(manifest)
        loaded = load_manifest(tmp_path)
        assert loaded.entries == [entry]
        back = load_sequence(tmp_path, entry, loaded)
        assert len(back.frames) == len(seq.frames)
        for f0, f1 in zip(seq.frames, back.frames):
            # 9 significant digits survive the text round trip.
            assert np.allclose(f1.wrench.as_array(), f0.wrench.as_array(),
                               rtol=1e-8, atol=1e-12)
            assert np.allclose(f1.effort, f0.effort, rtol=1e-8, atol=1e-12)
            assert np.allclose(f1.pose.position, f0.pose.position,
                               rtol=1e-8, atol=1e-12)
            assert f1.timestamp == pytest.approx(f0.timestamp, rel=1e-8)

    def test_saved_images_round_trip_bytes(self, tmp_path):
        from softwrench.render import load_png, save_png
        seq = self._seq()
        save_sequence(tmp_path, "seq_0000", seq)
        p = tmp_path / "seqs/seq_0000/img/f00005.png"
        img = load_png(p)
        save_png(tmp_path / "again.png", img)
        assert p.read_bytes() == (tmp_path / "again.png").read_bytes()

    def test_manifest_validation_missing_file(self, tmp_path):
        seq = self._seq()
        entry = save_sequence(tmp_path, "seq_0000", seq)
        bogus = SequenceEntry("seq_9999", "push", "lab", 3, 0)
        manifest = Manifest(root=str(tmp_path), version=1,
                            gripper_kind="tendon_actuated", image_rate_hz=10.0,
                            wrench_rate_hz=100.0, entries=[entry, bogus])
        save_manifest(manifest)
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path)

    def test_manifest_validation_count_mismatch(self, tmp_path):
        seq = self._seq()
        entry = save_sequence(tmp_path, "seq_0000", seq)
        wrong = SequenceEntry(entry.seq_id, entry.primitive, entry.env_id,
                              entry.n_frames + 1, entry.seed)
        manifest = Manifest(root=str(tmp_path), version=1,
                            gripper_kind="tendon_actuated", image_rate_hz=10.0,
                            wrench_rate_hz=100.0, entries=[wrong])
        save_manifest(manifest)
        with pytest.raises(ValueError, match="manifest says"):
            load_manifest(tmp_path)
