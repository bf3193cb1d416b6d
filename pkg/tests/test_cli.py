import json
import dataclasses

import pytest

import oracle
from main import EXIT_FALSIFIED, EXIT_OK, EXIT_USAGE, main
from scanner import read_records_csv, scan_grid, tie_locus
from utils import format_float


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestCompute:
    def test_symmetric_json(self, capsys):
        code, out, _ = run_cli(capsys, 'compute', '--p', '0.5', '--m-d', '0.5,2', '--format', 'json')
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload['h'] == pytest.approx(0.483941, abs=1e-6)
        assert payload['minimizers'] == pytest.approx([1.0])
        assert payload['unique'] is True

    def test_degenerate_with_padded_centre(self, capsys):
        code, out, _ = run_cli(capsys, 'compute', '--p', '0', '--a', '0', '--b', '0,5', '--format', 'json')
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload['h'] == pytest.approx(0.797885, abs=1e-6)
        assert payload['degenerate_gaussian'] is True
        assert payload['spec']['a'] == [0.0, 0.0]

    def test_human_format_carries_the_json_numbers(self, capsys):
        _, out_json, _ = run_cli(capsys, 'compute', '--m', '0.3', '--d', '3', '--format', 'json')
        _, out_human, _ = run_cli(capsys, 'compute', '--m', '0.3', '--d', '3', '--format', 'human')
        payload = json.loads(out_json)
        assert f"h: {format_float(payload['h'])}" in out_human
        assert f"r_star: {format_float(payload['r_star'])}" in out_human

    def test_csv_row(self, capsys):
        code, out, _ = run_cli(capsys, 'compute', '--m', '0.5', '--d', '2', '--format', 'csv')
        lines = out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == 'p,d,h,r_star,n_min,t1,t2,gap'
        assert lines[1].startswith('0.5,2,')

    @pytest.mark.parametrize('argv', [
        ['compute', '--p', '0.2', '--m', '0.3', '--d', '1'],
        ['compute', '--a', '0', '--b', '1', '--m', '0.3', '--d', '1'],
        ['compute', '--m', '0.3'],
        ['compute', '--p', '0.3'],
        ['compute', '--p', '2', '--b', '1'],
        ['compute', '--m-d', '0.3'],
        ['compute', '--bogus'],
        ['explode'],
    ])
    def test_usage_errors(self, capsys, argv):
        code, _, _ = run_cli(capsys, *argv)
        assert code == EXIT_USAGE

    def test_unwritable_output(self, capsys, tmp_path):
        target = tmp_path / 'missing' / 'out.json'
        code, _, err = run_cli(capsys, 'compute', '--m', '0.3', '--d', '1', '--output', str(target))
        assert code == EXIT_USAGE
        assert 'cannot write' in err

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / 'out.json'
        code, out, _ = run_cli(capsys, 'compute', '--m', '0.3', '--d', '1', '--format', 'json',
                               '--output', str(target))
        assert code == EXIT_OK and out == ''
        assert json.loads(target.read_text())['unique'] is True

    def test_config_file_supplies_defaults(self, capsys, tmp_path):
        config = tmp_path / 'cheeger.json'
        config.write_text(json.dumps({'run': {'format': 'json'}, 'mixture': {'m': 0.5, 'd': 2.0}}))
        code, out, _ = run_cli(capsys, 'compute', '--config', str(config))
        assert code == EXIT_OK
        assert json.loads(out)['minimizers'] == pytest.approx([1.0])

    def test_config_solver_section_reaches_the_solver(self, capsys, tmp_path):
        weight = tie_locus(3.0, (0.05, 0.10)) + 0.002
        argv = ['compute', '--m', repr(weight), '--d', '3', '--format', 'json']
        _, out, _ = run_cli(capsys, *argv)
        assert len(json.loads(out)['minimizers']) == 1

        config = tmp_path / 'wide.json'
        config.write_text(json.dumps({'solver': {'tie_tolerance': 0.5}}))
        code, out, _ = run_cli(capsys, *argv, '--config', str(config))
        assert code == EXIT_OK
        assert len(json.loads(out)['minimizers']) == 2


class TestOtherCommands:
    def test_checks_pass(self, capsys):
        code, out, _ = run_cli(capsys, 'checks', '--m', '0.3', '--d', '3')
        assert code == EXIT_OK
        assert out.splitlines() == [
            'ode_inequality: PASS',
            'local_log_concavity: PASS',
            'halfspace_ratio_monotone: PASS',
            'r_star_location: PASS',
        ]

    def test_profile_csv(self, capsys):
        code, out, _ = run_cli(capsys, 'profile', '--m', '0.3', '--d', '2', '--points', '5', '--format', 'csv')
        lines = out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == 'v,iso,r'
        assert len(lines) == 6

    def test_scan_csv_round_trip(self, capsys):
        code, out, _ = run_cli(capsys, 'scan', '--p-lo', '0.1', '--p-hi', '0.9', '--d-lo', '1',
                               '--d-hi', '4', '--np', '3', '--nd', '4', '--format', 'csv')
        assert code == EXIT_OK
        assert read_records_csv(out) == scan_grid(0.1, 0.9, 1.0, 4.0, 3, 4)

    def test_locus_without_separated_components(self, capsys):
        code, _, err = run_cli(capsys, 'locus', '--d', '1.5')
        assert code == EXIT_USAGE
        assert 'no tie locus' in err

    def test_threshold_symmetric(self, capsys):
        code, out, _ = run_cli(capsys, 'threshold', '--p', '0.5', '--format', 'json')
        assert code == EXIT_OK
        assert json.loads(out)['threshold'] == 0.0

    def test_verify_halfspaces(self, capsys):
        code, out, _ = run_cli(capsys, 'verify', '--p', '0.3', '--a', '0,0,0', '--b', '2,0,0',
                               '--trials', '20', '--kinds', 'halfspace', '--format', 'json')
        report = json.loads(out)
        assert code == EXIT_OK
        assert report['pass'] is True
        assert report['trials'] == 20

    def test_verify_unknown_kind(self, capsys):
        code, _, _ = run_cli(capsys, 'verify', '--m', '0.3', '--d', '2', '--kinds', 'cube')
        assert code == EXIT_USAGE

    def test_seeded_runs_are_byte_identical(self, capsys):
        argv = ['verify', '--m', '0.3', '--d', '2', '--n', '2', '--trials', '3', '--samples', '20000',
                '--kinds', 'ball,slab', '--seed', '5', '--format', 'json']
        first = run_cli(capsys, *argv)
        second = run_cli(capsys, *argv)
        assert first == second
        assert first[0] in (EXIT_OK, EXIT_FALSIFIED)

    def test_falsified_sweep_exits_one_with_report(self, capsys, monkeypatch):
        original = oracle.cheeger

        def inflated(spec, **kwargs):
            solution = original(spec, **kwargs)
            return dataclasses.replace(solution, h=solution.h + 0.05)

        monkeypatch.setattr(oracle, 'cheeger', inflated)
        code, out, _ = run_cli(capsys, 'verify', '--m', '0.3', '--d', '2', '--trials', '10',
                               '--kinds', 'halfspace', '--format', 'json')
        assert code == EXIT_FALSIFIED
        assert json.loads(out)['pass'] is False
