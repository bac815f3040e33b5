"""Counting-experiment pipeline tests.

The heavy oracle here re-enumerates small balls by brute force and
classifies every orbit image with the scalar exact-arithmetic path, then
demands equality with the streaming pipeline, boundary hits included.
"""

import io
import math
from fractions import Fraction

import numpy as np
import pytest

from latorbit.boundary import Arc, Cap, CirclePoint, ProjectivePoint, Region, classify_point
from latorbit.experiments import (
    ALL_REGION,
    CSV_HEADER,
    CountRow,
    CountTable,
    ExperimentConfig,
    config_hash,
    emit_report,
    estimate_covolume,
    fit_exponent,
    parse_report,
    report_text,
    resolved_config_text,
    run_count,
)
from latorbit.lattice import SubgroupSpec

from brute_force import brute_elements

HALF = Region.circle_arcs([(-1, 1)])
REST = Region.circle_arcs([(1, -1)])
QUARTERS = (
    ("Q1", Region.circle_arcs([(-1, 0)])),
    ("Q2", Region.circle_arcs([(0, 1)])),
    ("Q3", Region.circle_arcs([(1, -1)])),
)


def tiny_config(**kw) -> ExperimentConfig:
    base = dict(
        n=2,
        T_grid=(2.0,),
        regions=(("HALF", HALF),),
        basepoints=(("inf", CirclePoint(math.inf)),),
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_valid(self):
        cfg = tiny_config()
        assert cfg.T_grid == (2.0,)

    def test_bad_dimension(self):
        with pytest.raises(ValueError):
            tiny_config(n=1)
        with pytest.raises(ValueError):
            tiny_config(n=7)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            tiny_config(T_grid=())
        with pytest.raises(ValueError):
            tiny_config(T_grid=(5.0, 3.0))
        with pytest.raises(ValueError):
            tiny_config(T_grid=(2.0, 2.0))
        with pytest.raises(ValueError):
            tiny_config(T_grid=(-1.0,))

    def test_bad_regions(self):
        with pytest.raises(ValueError):
            tiny_config(regions=())
        with pytest.raises(ValueError):
            tiny_config(regions=(("A", HALF), ("A", REST)))
        with pytest.raises(ValueError):
            tiny_config(regions=((ALL_REGION, HALF),))
        with pytest.raises(ValueError):
            tiny_config(regions=(("bad,name", HALF),))
        cap = Region.projective_caps([Cap.from_cos_alpha(np.array([1, 0, 0]), Fraction(1, 2))])
        with pytest.raises(ValueError):
            tiny_config(regions=(("CAP", cap),))

    def test_bad_basepoints(self):
        with pytest.raises(ValueError):
            tiny_config(basepoints=())
        with pytest.raises(ValueError):
            tiny_config(
                basepoints=(("x", CirclePoint(0)), ("x", CirclePoint(1)))
            )
        with pytest.raises(ValueError):
            tiny_config(basepoints=(("p", ProjectivePoint(np.array([1, 0]))),))

    def test_dimension_three_wiring(self):
        cap = Region.projective_caps([Cap.from_cos_alpha(np.array([1, 0, 0]), Fraction(1, 2))])
        cfg = tiny_config(
            n=3,
            regions=(("CAP", cap),),
            basepoints=(("e1", ProjectivePoint(np.array([1, 0, 0]))),),
        )
        assert cfg.n == 3
        with pytest.raises(ValueError):
            tiny_config(n=3, regions=(("HALF", HALF),),
                        basepoints=(("e1", ProjectivePoint(np.array([1, 0, 0]))),))

    def test_resource_bounds(self):
        with pytest.raises(ValueError):
            tiny_config(threads=0)
        with pytest.raises(ValueError):
            tiny_config(max_elements=0)


class TestRunCountFrozen:
    def test_whole_group_at_radius_two(self):
        table = run_count(tiny_config())
        all_row = table.total_rows("inf")[0]
        assert all_row.count == 20
        assert all_row.ratio == 1.0
        assert all_row.m_omega == 1.0

    def test_tiny_radius(self):
        table = run_count(tiny_config(T_grid=(1.5,)))
        assert table.total_rows("inf")[0].count == 4

    def test_congruence_level_two(self):
        table = run_count(
            tiny_config(T_grid=(2.0,), subgroup=SubgroupSpec.congruence(2))
        )
        assert table.total_rows("inf")[0].count == 2

    def test_partition_identity_flagged_and_checked(self):
        cfg = tiny_config(
            T_grid=(5.0, 10.0),
            regions=QUARTERS,
            basepoints=(("0", CirclePoint(0)), ("1/3", CirclePoint("1/3"))),
        )
        table = run_count(cfg)
        assert table.partition
        table.validate()
        for T in (5.0, 10.0):
            for bp in ("0", "1/3"):
                rows = {r.region: r for r in table.rows if r.T == T and r.basepoint == bp}
                interior = sum(r.count for k, r in rows.items() if k != ALL_REGION)
                assert interior + rows[ALL_REGION].boundary_hits == rows[ALL_REGION].count

    def test_zero_inf_basepoints_agree_exactly(self):
        # right multiplication by the norm-preserving rotation matrix maps
        # the orbit of infinity bijectively onto the orbit of zero, so all
        # counts agree exactly for the full group
        cfg = tiny_config(
            T_grid=(4.0, 8.0),
            regions=(("HALF", HALF), ("REST", REST)),
            basepoints=(("0", CirclePoint(0)), ("inf", CirclePoint(math.inf))),
        )
        table = run_count(cfg)
        by_bp = {"0": [], "inf": []}
        for r in table.rows:
            by_bp[r.basepoint].append((r.T, r.region, r.count, r.boundary_hits))
        assert sorted(by_bp["0"]) == sorted(by_bp["inf"])


class TestRunCountOracle:
    @pytest.mark.parametrize("T", [2.0, 3.0])
    @pytest.mark.parametrize("bp_token", ["0", "1/3", "inf"])
    def test_counts_match_scalar_classification(self, T, bp_token):
        # brute-force elements, scalar exact classification of each image
        point = CirclePoint(math.inf if bp_token == "inf" else Fraction(bp_token))
        regions = (("HALF", HALF), ("REST", REST))
        cfg = tiny_config(T_grid=(T,), regions=regions, basepoints=((bp_token, point),))
        table = run_count(cfg)

        p, q = point.as_pair()
        expected = {name: [0, 0] for name, _ in regions}
        total = 0
        for flat in brute_elements(2, T):
            a, b, c, d = flat
            u, v = a * p + b * q, c * p + d * q
            image = CirclePoint(math.inf if v == 0 else Fraction(u, v))
            total += 1
            for name, region in regions:
                status = classify_point(region, image)
                if status == "inside":
                    expected[name][0] += 1
                elif status == "boundary":
                    expected[name][1] += 1
        assert table.total_rows(bp_token)[0].count == total
        for name, _ in regions:
            row = next(r for r in table.rows if r.region == name)
            assert row.count == expected[name][0]
            assert row.boundary_hits == expected[name][1]

    def test_projective_counts_match_scalar(self):
        cap = Region.projective_caps([Cap.from_cos_alpha(np.array([1, 0, 0]), Fraction(1, 2))])
        bp = ProjectivePoint(np.array([1, 0, 0]))
        cfg = tiny_config(
            n=3, T_grid=(2.0,), regions=(("CAP", cap),), basepoints=(("e1", bp),)
        )
        table = run_count(cfg)
        inside = boundary = total = 0
        for flat in brute_elements(3, 2.0):
            m = np.array(flat, dtype=np.int64).reshape(3, 3)
            image = ProjectivePoint(m @ bp.v)
            status = classify_point(cap, image)
            total += 1
            inside += status == "inside"
            boundary += status == "boundary"
        row = next(r for r in table.rows if r.region == "CAP")
        assert (row.count, row.boundary_hits) == (inside, boundary)
        assert table.total_rows("e1")[0].count == total

    def test_monotone_in_radius(self):
        cfg = tiny_config(T_grid=(2.0, 4.0, 6.0, 9.0))
        table = run_count(cfg)
        counts = [r.count for r in table.total_rows("inf")]
        assert counts == sorted(counts)
        assert counts[0] < counts[-1]

    def test_threads_do_not_change_counts(self):
        cfg1 = tiny_config(T_grid=(6.0, 12.0), regions=QUARTERS,
                           basepoints=(("0", CirclePoint(0)),))
        cfg2 = tiny_config(T_grid=(6.0, 12.0), regions=QUARTERS,
                           basepoints=(("0", CirclePoint(0)),), threads=3)
        t1 = run_count(cfg1)
        t2 = run_count(cfg2)
        assert [(r.region, r.T, r.count, r.boundary_hits) for r in t1.rows] == [
            (r.region, r.T, r.count, r.boundary_hits) for r in t2.rows
        ]


class TestTableValidation:
    def make_row(self, **kw):
        base = dict(
            T=2.0, region=ALL_REGION, basepoint="inf", count=10, boundary_hits=0,
            ratio=1.0, m_omega=1.0, deviation=0.0, covolume_est=0.1,
        )
        base.update(kw)
        return CountRow(**base)

    def test_decreasing_counts_rejected(self):
        table = CountTable(
            rows=(self.make_row(T=2.0, count=10), self.make_row(T=3.0, count=5))
        )
        with pytest.raises(ValueError, match="decrease"):
            table.validate()

    def test_missing_total_row_rejected(self):
        table = CountTable(rows=(self.make_row(region="A"),))
        with pytest.raises(ValueError, match=ALL_REGION):
            table.validate()

    def test_partition_identity_enforced(self):
        rows = (
            self.make_row(count=10, boundary_hits=1),
            self.make_row(region="A", count=4, ratio=0.4, m_omega=0.5, deviation=0.1),
            self.make_row(region="B", count=4, ratio=0.4, m_omega=0.5, deviation=0.1),
        )
        CountTable(rows=rows, partition=False).validate()
        with pytest.raises(ValueError, match="partition identity"):
            CountTable(rows=rows, partition=True).validate()
        good = rows[:2] + (
            self.make_row(region="B", count=5, ratio=0.5, m_omega=0.5, deviation=0.0),
        )
        CountTable(rows=good, partition=True).validate()


class TestFitExponent:
    def synthetic(self, c, power, grid, n_meta=2):
        rows = []
        for T in grid:
            count = int(round(c * T**power))
            rows.append(
                CountRow(T=T, region=ALL_REGION, basepoint="x", count=count,
                         boundary_hits=0, ratio=1.0, m_omega=1.0, deviation=0.0,
                         covolume_est=0.0)
            )
        return CountTable(rows=tuple(rows), meta={"n": n_meta})

    def test_exact_power_law(self):
        table = self.synthetic(3.0, 2, (10.0, 20.0, 40.0, 80.0))
        slope, r_sq = fit_exponent(table)
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert r_sq == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_grid(self):
        with pytest.raises(ValueError):
            fit_exponent(self.synthetic(3.0, 2, (10.0, 20.0)))

    def test_real_run_slope_near_two(self):
        table = run_count(tiny_config(T_grid=(10.0, 20.0, 40.0)))
        slope, r_sq = fit_exponent(table)
        assert slope == pytest.approx(2.0, rel=0.1)
        assert r_sq > 0.995


class TestEstimateCovolume:
    def test_inversion_identity(self):
        from latorbit.haar import gamma_n

        mu0 = 0.3305
        grid = (100.0, 200.0)
        rows = []
        for T in grid:
            count = gamma_n(2) * T * T / mu0
            rows.append(
                CountRow(T=T, region=ALL_REGION, basepoint="x", count=int(round(count)),
                         boundary_hits=0, ratio=1.0, m_omega=1.0, deviation=0.0,
                         covolume_est=0.0)
            )
        table = CountTable(rows=tuple(rows), meta={"n": 2})
        for (T, est), row in zip(estimate_covolume(table), rows):
            assert est == gamma_n(2) * T * T / row.count
            assert est == pytest.approx(mu0, rel=1e-4)

    def test_matches_report_column(self):
        table = run_count(tiny_config(T_grid=(5.0, 9.0)))
        ests = dict(estimate_covolume(table))
        for row in table.total_rows("inf"):
            assert ests[row.T] == row.covolume_est

    def test_requires_dimension(self):
        table = run_count(tiny_config(T_grid=(5.0,)))
        stripped = CountTable(rows=table.rows)
        with pytest.raises(ValueError):
            estimate_covolume(stripped)
        assert estimate_covolume(stripped, n=2) == estimate_covolume(table)

    def test_zero_count_rejected(self):
        row = CountRow(T=1.0, region=ALL_REGION, basepoint="x", count=0,
                       boundary_hits=0, ratio=math.nan, m_omega=1.0,
                       deviation=math.nan, covolume_est=math.inf)
        with pytest.raises(ValueError):
            estimate_covolume(CountTable(rows=(row,), meta={"n": 2}))


class TestReports:
    def test_csv_round_trip(self):
        table = run_count(tiny_config(T_grid=(3.0, 5.0), regions=QUARTERS))
        text = report_text(table)
        back = parse_report(io.StringIO(text))
        assert back == table

    def test_json_round_trip_with_metadata(self):
        table = run_count(tiny_config(T_grid=(3.0,)))
        text = report_text(table, "json")
        back = parse_report(io.StringIO(text))
        assert back == table
        assert back.meta["config_hash"] == table.meta["config_hash"]
        assert back.partition == table.partition
        assert back.meta["versions"]["numpy"]

    def test_deterministic_bytes(self):
        cfg = tiny_config(T_grid=(4.0, 7.0), regions=QUARTERS,
                          basepoints=(("0", CirclePoint(0)),))
        a = report_text(run_count(cfg))
        b = report_text(run_count(cfg))
        assert a == b

    def test_header_only_for_empty_table(self):
        assert report_text(CountTable(rows=())) == CSV_HEADER + "\n"

    def test_header_enforced_on_parse(self):
        with pytest.raises(ValueError, match="header"):
            parse_report(io.StringIO("a,b,c\n1,2,3\n"))
        with pytest.raises(ValueError, match="malformed"):
            parse_report(io.StringIO(CSV_HEADER + "\n1,2,3\n"))

    def test_deviation_column_consistent(self):
        table = run_count(tiny_config(T_grid=(5.0,), regions=QUARTERS))
        for row in table.rows:
            assert row.deviation == pytest.approx(abs(row.ratio - row.m_omega), abs=1e-15)

    def test_emit_to_path(self, tmp_path):
        table = run_count(tiny_config())
        path = tmp_path / "out.csv"
        emit_report(table, path)
        assert parse_report(path) == table
        jpath = tmp_path / "out.json"
        emit_report(table, jpath, "json")
        assert parse_report(jpath) == table

    def test_bad_format_rejected(self):
        with pytest.raises(ValueError):
            emit_report(CountTable(rows=()), io.StringIO(), "xml")


class TestConfigHash:
    def test_stable_and_sensitive(self):
        a = tiny_config()
        b = tiny_config()
        assert config_hash(a) == config_hash(b)
        c = tiny_config(seed=99)
        assert config_hash(a) != config_hash(c)

    def test_resolved_text_mentions_everything(self):
        text = resolved_config_text(
            tiny_config(regions=QUARTERS, basepoints=(("1/3", CirclePoint("1/3")),))
        )
        assert "n = 2" in text
        assert "basepoint 1/3 = 1/3" in text
        assert "region Q3 = arc 1 -1" in text
