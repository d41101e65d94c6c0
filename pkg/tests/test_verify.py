import pytest

from shiftlab.verify import CHECKS, Context, faulty_context, run_checks


class TestRegistry:
    def test_every_module_covered(self):
        modules = {module for _, module, _ in CHECKS}
        assert modules == {"signals", "margin", "kernels", "nets", "attacks", "highdim", "datagen", "experiments"}

    def test_unique_names(self):
        names = [name for name, _, _ in CHECKS]
        assert len(names) == len(set(names))


class TestRunChecks:
    def test_all_pass(self):
        results = run_checks()
        assert len(results) == len(CHECKS)
        assert all(r.passed for r in results), [r for r in results if not r.passed]

    @pytest.mark.parametrize("module", ["signals", "margin", "kernels"])
    def test_filter_by_module(self, module):
        results = run_checks(module)
        assert results and {r.module for r in results} == {module}

    def test_filter_by_name(self):
        [r] = run_checks("ntk_symmetry")
        assert r.name == "ntk_symmetry"

    def test_unknown_filter_is_empty(self):
        assert run_checks("nothing") == []

    def test_fault_is_caught(self):
        results = {r.name: r for r in run_checks("kernels", break_ntk_symmetry=True)}
        assert not results["ntk_symmetry"].passed

    def test_faulty_context_is_asymmetric(self):
        k = faulty_context().ntk
        assert k([1.0, 0.0], [0.0, 1.0]) != k([0.0, 1.0], [1.0, 0.0])
        assert Context().ntk([1.0, 0.0], [0.0, 1.0]) == Context().ntk([0.0, 1.0], [1.0, 0.0])

    def test_crash_counts_as_failure(self, monkeypatch):
        import shiftlab.verify as verify

        def explode(ctx):
            raise RuntimeError("boom")

        monkeypatch.setattr(verify, "CHECKS", [("explode", "signals", explode)])
        [r] = verify.run_checks()
        assert not r.passed and "boom" in r.detail
