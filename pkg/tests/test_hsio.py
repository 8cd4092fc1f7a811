import json
import struct

import numpy as np
import pytest

from hsdip import hsio
from hsdip.hsio import (FormatError, RunFile, import_npy, read_cube, read_run_file,
                        run_file_from_dict, run_file_to_dict, write_cube,
                        write_run_file)
from hsdip.ndtensor import Rng
from hsdip.noisegen import NoiseSpec
from hsdip.pipeline import RunConfig


class TestCubeFile:
    def test_round_trip_f32_exact(self, tmp_path):
        cube = Rng(0).uniform([4, 5, 6], 0, 1)
        path = tmp_path / "c.hsic"
        write_cube(cube, path)
        again = read_cube(path)
        np.testing.assert_array_equal(again, cube.astype(np.float32).astype(np.float64))
        assert again.dtype == np.float64

    def test_header_layout_little_endian(self, tmp_path):
        path = tmp_path / "c.hsic"
        write_cube(np.zeros((2, 3, 4)), path)
        raw = path.read_bytes()
        magic, version, dtype, h, w, b = struct.unpack("<4sHHIII", raw[:20])
        assert (magic, version, dtype) == (b"HSIC", 1, 0)
        assert (h, w, b) == (2, 3, 4)
        assert len(raw) == 20 + 4 * 24

    def test_truncated_payload_names_byte_counts(self, tmp_path):
        path = tmp_path / "c.hsic"
        write_cube(np.zeros((2, 3, 4)), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(FormatError, match=r"truncated payload.*96.*88"):
            read_cube(path)

    def test_oversized_payload_rejected(self, tmp_path):
        path = tmp_path / "c.hsic"
        write_cube(np.zeros((2, 3, 4)), path)
        path.write_bytes(path.read_bytes() + b"\x00" * 4)
        with pytest.raises(FormatError, match="oversized"):
            read_cube(path)

    def test_zero_extent_rejected(self, tmp_path):
        path = tmp_path / "c.hsic"
        path.write_bytes(struct.pack("<4sHHIII", b"HSIC", 1, 0, 0, 3, 4))
        with pytest.raises(FormatError, match="zero extent"):
            read_cube(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.hsic"
        path.write_bytes(struct.pack("<4sHHIII", b"NOPE", 1, 0, 1, 1, 1) + b"\x00" * 4)
        with pytest.raises(FormatError, match="bad magic"):
            read_cube(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "c.hsic"
        path.write_bytes(struct.pack("<4sHHIII", b"HSIC", 9, 0, 1, 1, 1) + b"\x00" * 4)
        with pytest.raises(FormatError, match="version"):
            read_cube(path)


class TestNpyImport:
    def test_round_trip_f32(self, tmp_path):
        cube = Rng(1).uniform([3, 4, 5], 0, 1).astype("<f4")
        path = tmp_path / "a.npy"
        np.save(path, cube)
        got = import_npy(path)
        np.testing.assert_array_equal(got, cube.astype(np.float64))

    def test_round_trip_f64(self, tmp_path):
        cube = Rng(2).uniform([3, 4, 5], 0, 1)
        path = tmp_path / "a.npy"
        np.save(path, cube)
        np.testing.assert_array_equal(import_npy(path), cube)

    def test_fortran_order_rejected(self, tmp_path):
        path = tmp_path / "f.npy"
        np.save(path, np.asfortranarray(np.zeros((2, 3, 4), dtype="<f4")))
        with pytest.raises(FormatError, match="Fortran"):
            import_npy(path)

    def test_rank_2_rejected(self, tmp_path):
        path = tmp_path / "r.npy"
        np.save(path, np.zeros((3, 4), dtype="<f4"))
        with pytest.raises(FormatError, match="3-D"):
            import_npy(path)

    def test_int_dtype_rejected(self, tmp_path):
        path = tmp_path / "i.npy"
        np.save(path, np.zeros((2, 2, 2), dtype=np.int32))
        with pytest.raises(FormatError, match="dtype"):
            import_npy(path)

    def test_not_npy(self, tmp_path):
        path = tmp_path / "x.npy"
        path.write_bytes(b"this is not numpy data at all")
        with pytest.raises(FormatError):
            import_npy(path)


class TestRunFile:
    def test_defaults_materialized_on_write(self, tmp_path):
        path = tmp_path / "run.json"
        write_run_file(RunFile(run=RunConfig()), path)
        d = json.loads(path.read_text())
        assert d["network"]["channels"] == [16, 32, 64]
        assert d["loss"]["alpha1"] == 0.01
        assert d["loss"]["alpha2"] == 1.0
        assert d["optimizer"]["lr"] == 0.005
        assert d["stop"] == {"rel_err_tol": 0.01, "max_iters": 7000, "check_interval": 100}

    def test_round_trip(self, tmp_path):
        rf = RunFile(
            run=RunConfig(lambda_over_n=0.4, seed=42),
            noise=NoiseSpec(gaussian_sigma=0.1, impulse_rate=0.1,
                            stripe_band_fraction=0.4, stripe_count_range=(6, 15)),
            input="in.hsic", output="out.hsic",
        )
        path = tmp_path / "run.json"
        write_run_file(rf, path)
        again = read_run_file(path)
        assert again.run == rf.run
        assert again.noise == rf.noise
        assert (again.input, again.output) == ("in.hsic", "out.hsic")

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(FormatError, match="unknown key"):
            run_file_from_dict({"bogus": 1})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(FormatError, match="unknown key.*momentum"):
            run_file_from_dict({"optimizer": {"momentum": 0.9}})

    def test_case_and_noise_exclusive(self):
        with pytest.raises(FormatError, match="mutually exclusive"):
            run_file_from_dict({"case": 1, "noise": {"gaussian_sigma": 0.1}})

    def test_case_preset_resolution(self):
        rf = run_file_from_dict({"case": 3})
        spec = rf.noise_spec()
        assert spec.stripe_band_fraction == 0.4
        assert spec.stripe_count_range == (6, 15)

    def test_partial_sections_get_defaults(self):
        rf = run_file_from_dict({"loss": {"lambda_over_n": 0.2}, "seed": 9})
        assert rf.run.lambda_over_n == 0.2
        assert rf.run.alpha1 == 0.01
        assert rf.run.seed == 9
        assert rf.run.stop.max_iters == 7000

    def test_invalid_json_is_format_error(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        with pytest.raises(FormatError):
            read_run_file(path)

    def test_write_back_is_parseable_closed_loop(self, tmp_path):
        d = {"case": 2, "seed": 5}
        rf = run_file_from_dict(d)
        path = tmp_path / "run.json"
        write_run_file(rf, path)
        again = read_run_file(path)
        assert run_file_to_dict(again) == run_file_to_dict(rf)
