"""
Unit tests for fundusnet.storage.schema module
"""

from dataclasses import MISSING

import pytest

from fundusnet.storage import EpochRecord, MetricRecord, RunRecord
from fundusnet.storage.schema import RECORD_TYPES
from fundusnet.storage.store import get_record_class, matches


class TestRecordSchema:
    """Test column schemas derived from record dataclasses"""

    def test_id_column(self):
        """Test that id is a nullable auto-increment primary key"""
        schema = RunRecord.get_schema()
        assert schema["id"]["primary_key"] is True
        assert schema["id"]["auto_increment"] is True
        assert schema["id"]["nullable"] is True

    def test_column_types(self):
        """Test column types and nullability from annotations"""
        schema = MetricRecord.get_schema()
        assert schema["model"]["type"] == "str"
        assert schema["grade"]["type"] == "int"
        assert schema["grade"]["nullable"] is True
        assert schema["value"]["type"] == "float"
        assert schema["metric"]["nullable"] is False

    def test_dict_field_is_json(self):
        """Test that dict fields become JSON columns and indexed fields are marked"""
        schema = RunRecord.get_schema()
        assert schema["config"]["type"] == "json"
        assert schema["config"]["default"] is MISSING
        assert schema["run_id"]["index"] is True

    def test_exclude(self):
        """Test that excluded columns are left out"""
        assert "id" not in EpochRecord.get_schema(exclude=["id"])

    def test_tables(self):
        """Test the table name of every record type"""
        assert [r.table for r in RECORD_TYPES] == ["runs", "history", "metrics"]


class TestRecordValues:
    """Test record conversion helpers"""

    def test_get_values_skips_id(self):
        """Test that stored values leave out the id"""
        record = EpochRecord(run_id="r", epoch=2, loss=0.5)
        record.id = 7
        values = record.get_values()
        assert "id" not in values
        assert values["epoch"] == 2
        assert record.to_dict()["id"] == 7

    def test_from_row(self):
        """Test building a record from a database row"""
        record = MetricRecord.from_row({"id": 3, "run_id": "r", "model": "m", "metric": "f_measure", "grade": None, "value": 0.5})
        assert record.id == 3
        assert record.grade is None
        assert record.value == 0.5

    def test_created_timestamp(self):
        """Test that new runs get a UTC timestamp"""
        assert RunRecord(run_id="r").created.endswith("+00:00")

    def test_get_record_class(self):
        """Test resolving record classes from classes and instances"""
        assert get_record_class(RunRecord) is RunRecord
        assert get_record_class(RunRecord()) is RunRecord
        with pytest.raises(TypeError):
            get_record_class(dict)

    def test_matches(self):
        """Test row filtering by equality"""
        row = {"run_id": "r", "grade": None}
        assert matches(row, None)
        assert matches(row, {"grade": None})
        assert not matches(row, {"run_id": "s"})
