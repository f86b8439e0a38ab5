"""Round-trip tests for the binary tensor container and CSV exports."""

import numpy as np
import pytest

from ramc import (
    MetricRecord,
    SamplingMask,
    ShapeError,
    export_mask,
    export_singular_values,
    export_support,
    load_tensor,
    read_records,
    save_tensor,
    write_records,
    write_solver_trace,
)
from ramc.io import TENSOR_MAGIC


class TestTensorContainer:
    def test_round_trip_3d(self, tmp_path):
        rng = np.random.default_rng(300)
        t = rng.standard_normal((5, 8, 8)) + 1j * rng.standard_normal((5, 8, 8))
        path = tmp_path / "track.bin"
        save_tensor(path, t)
        assert np.array_equal(load_tensor(path), t)

    def test_2d_promoted_to_single_step(self, tmp_path):
        m = np.eye(4, dtype=complex)
        path = tmp_path / "single.bin"
        save_tensor(path, m)
        out = load_tensor(path)
        assert out.shape == (1, 4, 4)
        assert np.array_equal(out[0], m)

    def test_magic_bytes(self, tmp_path):
        path = tmp_path / "t.bin"
        save_tensor(path, np.ones((2, 2), dtype=complex))
        assert path.read_bytes()[:8] == TENSOR_MAGIC

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAGIC" + b"\0" * 24)
        with pytest.raises(ShapeError, match="magic"):
            load_tensor(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "trunc.bin"
        save_tensor(path, np.ones((2, 3), dtype=complex))
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(ShapeError):
            load_tensor(path)

    def test_4d_rejected(self, tmp_path):
        with pytest.raises(ShapeError):
            save_tensor(tmp_path / "x.bin", np.ones((2, 2, 2, 2)))


def _records():
    return [
        MetricRecord(
            variant="rank_aware",
            snr_db=10.0,
            trial=0,
            t=0,
            nmse=0.01,
            nmse_db=-20.0,
            recovered=True,
            ber=None,
            rank_true=2,
            rank_est=2,
            runtime_ms=12.5,
            error="",
        ),
        MetricRecord(
            variant="coarse_only",
            snr_db=10.0,
            trial=1,
            t=0,
            nmse=0.5,
            nmse_db=-3.01,
            recovered=False,
            ber=0.25,
            rank_true=2,
            rank_est=1,
            runtime_ms=3.25,
            error="",
        ),
    ]


class TestRecordsCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "records.csv"
        write_records(path, _records())
        loaded = read_records(path)
        assert len(loaded) == 2
        assert loaded[0].variant == "rank_aware"
        assert loaded[0].nmse == 0.01
        assert loaded[0].recovered is True
        assert loaded[0].ber is None
        assert loaded[1].ber == 0.25
        assert loaded[1].recovered is False

    def test_runtime_blanked_by_default(self, tmp_path):
        # Wall-clock noise must not leak into the canonical artifact.
        path = tmp_path / "records.csv"
        write_records(path, _records())
        assert read_records(path)[0].runtime_ms == 0.0
        write_records(path, _records(), include_runtime=True)
        assert read_records(path)[0].runtime_ms == 12.5

    def test_byte_identical_rewrites(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records(a, _records())
        write_records(b, _records())
        assert a.read_bytes() == b.read_bytes()

    def test_header_matches_field_order(self, tmp_path):
        path = tmp_path / "records.csv"
        write_records(path, _records())
        header = path.read_text().splitlines()[0]
        assert header == (
            "variant,snr_db,trial,t,nmse,nmse_db,recovered,ber,"
            "rank_true,rank_est,runtime_ms,error"
        )


def test_export_mask(tmp_path):
    mask = SamplingMask.from_indices(3, 3, [(0, 1), (2, 0)])
    path = tmp_path / "mask.csv"
    export_mask(path, mask)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "row,col"
    assert lines[1:] == ["0,1", "2,0"]


def test_export_singular_values(tmp_path):
    path = tmp_path / "sv.csv"
    export_singular_values(path, [np.diag([3.0, 1.0]), np.diag([2.0, 0.5])])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,sigma_1,sigma_2"
    assert lines[1].startswith("0,3.0")
    assert lines[2].startswith("1,2.0")


def test_write_solver_trace(tmp_path):
    path = tmp_path / "trace.csv"
    write_solver_trace(path, [(0, 10.0, 1.0, 3), (1, 5.0, 0.1, 2)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "iteration,objective,feasibility,active_rank"
    assert len(lines) == 3


def test_export_support(tmp_path):
    from ramc import SparseGainEstimate

    est = SparseGainEstimate(
        gains=np.array([[1.0 + 1.0j]]),
        support=((0, 0),),
        selection_order=(0,),
        residual_norm=0.0,
        parameter_set=((0.5, -0.25, 1.0 + 1.0j),),
    )
    path = tmp_path / "support.csv"
    export_support(path, [(0, est)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,aoa_deg,aod_deg,gain_re,gain_im,gain_abs"
    assert len(lines) == 2
    assert lines[1].startswith("0,")
