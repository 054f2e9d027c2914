import pickle

import pytest

from epiflux.exceptions import (
    ConfigError,
    ConfigValidationError,
    DegenerateSampleError,
    EpifluxError,
    EventBudgetExceededError,
    GridMismatchError,
    HorizonError,
    RegressionInputError,
    StateUnderflowError,
    StatisticalGateError,
    StepSizeError,
    UnknownConfigKeyError,
)


def test_config_errors_exit_with_2():
    """Every config failure maps to exit code 2."""
    for exc in (
        ConfigError('bad'),
        ConfigValidationError('beta1', 'must be < 1'),
        UnknownConfigKeyError('betta0'),
    ):
        assert isinstance(exc, EpifluxError)
        assert exc.exit_code == 2


def test_runtime_errors_exit_with_3():
    for exc in (
        StateUnderflowError('recovery', (1, 0, 0)),
        EventBudgetExceededError(10, 0.5),
        HorizonError(3.0, 2.0),
        StepSizeError(0.1, 0.2, -0.5),
        GridMismatchError('grids differ'),
        DegenerateSampleError('zero variance'),
        RegressionInputError('too few points'),
    ):
        assert exc.exit_code == 3
        assert exc.to_record()['error_type'] == type(exc).__name__


def test_gate_error_exits_with_4():
    exc = StatisticalGateError(['slope -0.3 outside [-0.6, -0.4]', 'KS p-value 0.001'])
    assert exc.exit_code == 4
    assert 'slope' in str(exc)
    assert exc.to_record()['failures'] == exc.failures


def test_config_error_position():
    exc = ConfigError('Malformed JSON: Expecting value', line=3, column=12)
    assert str(exc) == 'Malformed JSON: Expecting value (line 3, column 12)'
    record = exc.to_record()
    assert (record['line'], record['column']) == (3, 12)
    assert 'line' not in ConfigError('plain').to_record()


def test_validation_error_names_field():
    exc = ConfigValidationError('beta1', 'must be < 1')
    assert exc.field == 'beta1'
    assert '"beta1"' in str(exc)


def test_budget_error_mentions_run():
    exc = EventBudgetExceededError(100, 0.25, run_index=7)
    assert 'run 7' in str(exc)
    record = exc.to_record()
    assert record['run_index'] == 7
    assert record['budget'] == 100
    assert EventBudgetExceededError(100, 0.25).to_record()['run_index'] is None


@pytest.mark.parametrize(
    'exc',
    [
        EventBudgetExceededError(100, 0.25, run_index=3),
        StateUnderflowError('infection', (0, 0, 4)),
        HorizonError(3.0, 2.0),
    ],
)
def test_errors_survive_pickling(exc):
    """Worker processes send these errors back through pickle."""
    clone = pickle.loads(pickle.dumps(exc))
    assert type(clone) is type(exc)
    assert str(clone) == str(exc)
    assert clone.to_record() == exc.to_record()
