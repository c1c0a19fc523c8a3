"""
Unit tests for run_context module.
"""

import logging

import pytest

from src.utils.run_context import (
    RunContext,
    RunIdFilter,
    clear_run_id,
    generate_run_id,
    get_run_id,
    set_run_id,
)


class TestRunIdGeneration:
    """Test run ID generation."""

    def test_generate_run_id_is_short_hex(self):
        """Test that generated IDs are 12 hex digits."""
        run_id = generate_run_id()

        assert len(run_id) == 12
        int(run_id, 16)

    def test_generate_run_id_returns_unique_values(self):
        """Test that generated IDs differ."""
        assert len({generate_run_id() for _ in range(3)}) == 3


class TestRunIdContext:
    """Test run ID context management."""

    def test_get_run_id_returns_none_when_not_set(self):
        """Test that get returns None outside a run."""
        assert get_run_id() is None

    def test_set_and_get_run_id(self):
        """Test setting and retrieving the run ID."""
        set_run_id("stage1-run")

        assert get_run_id() == "stage1-run"

    @pytest.mark.parametrize("value", ["", None, 12345])
    def test_set_run_id_rejects_invalid_values(self, value):
        """Test that empty and non-string IDs raise ValueError."""
        with pytest.raises(ValueError, match="non-empty string"):
            set_run_id(value)

    def test_clear_run_id(self):
        """Test clearing the run ID."""
        set_run_id("abc")
        clear_run_id()

        assert get_run_id() is None


class TestRunContextManager:
    """Test the RunContext context manager."""

    def test_context_generates_id(self):
        """Test that an ID is generated when none is given."""
        with RunContext() as run_id:
            assert get_run_id() == run_id
            assert len(run_id) == 12

        assert get_run_id() is None

    def test_context_uses_given_id(self):
        """Test that a given ID is used."""
        with RunContext("sweep-0.1-3") as run_id:
            assert run_id == "sweep-0.1-3"

    def test_nested_context_restores_outer_id(self):
        """Test that leaving an inner run restores the enclosing one."""
        with RunContext("outer"):
            with RunContext("inner"):
                assert get_run_id() == "inner"
            assert get_run_id() == "outer"

    def test_context_clears_on_exception(self):
        """Test that the ID is cleared when the body raises."""
        with pytest.raises(RuntimeError):
            with RunContext("failing"):
                raise RuntimeError("boom")

        assert get_run_id() is None


class TestRunIdFilter:
    """Test the logging filter."""

    def make_record(self):
        return logging.LogRecord("recnet", logging.INFO, __file__, 1, "message", None, None)

    def test_filter_sets_run_id(self):
        """Test that records carry the current run ID."""
        record = self.make_record()

        with RunContext("abc123"):
            assert RunIdFilter().filter(record) is True

        assert record.run_id == "abc123"

    def test_filter_outside_run(self):
        """Test the placeholder outside any run."""
        record = self.make_record()

        RunIdFilter().filter(record)

        assert record.run_id == "-"
