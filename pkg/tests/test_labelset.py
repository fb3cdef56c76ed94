import pytest
from hypothesis import given, strategies as st

import street_scene
from labeleval.embeddings import UNKNOWN_TOKEN
from labeleval.errors import (
    BadConfidenceError,
    DuplicateImageError,
    EmptyInputError,
    ParseError,
)
from labeleval.labelset import (
    PredictedObject,
    PredictionRecord,
    label_bag,
    metadata_stats,
    read_ground_truth,
    read_predictions,
    top_k,
    write_predictions,
)


def record_with_confidences(confidences):
    objects = tuple(PredictedObject(synonyms=(f"label{i}",), confidence=c)
                    for i, c in enumerate(confidences))
    return PredictionRecord(image_id="img", api_id="api", objects=objects)


class TestGroundTruthReader:
    def test_single_record(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text('{"image_id": "1", "labels": ["car", "tree"]}\n')
        records = read_ground_truth(path)
        assert len(records) == 1
        assert records[0].labels == ("car", "tree")

    def test_duplicate_image(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text('{"image_id": "1", "labels": ["a"]}\n'
                        '{"image_id": "1", "labels": ["b"]}\n')
        with pytest.raises(DuplicateImageError):
            read_ground_truth(path)

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text('{"image_id": "1", "labels": ["a"]}\nnot json\n')
        with pytest.raises(ParseError) as info:
            read_ground_truth(path)
        assert info.value.line_no == 2

    def test_street_scene_truth_has_25_labels(self, fixture_files):
        records = read_ground_truth(fixture_files["truth"])
        assert len(records) == 1
        assert len(records[0].labels) == 25


class TestPredictionReader:
    def test_synonym_set_preserved(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text(
            '{"image_id": "1", "api_id": "a", "objects": '
            '[{"labels": ["cab", "hack", "taxi", "taxicab"], "confidence": 0.9}]}\n')
        records = read_predictions(path)
        assert records[0].objects[0].synonyms == ("cab", "hack", "taxi", "taxicab")

    def test_confidence_out_of_range(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text('{"image_id": "1", "api_id": "a", "objects": '
                        '[{"labels": ["x"], "confidence": 1.5}]}\n')
        with pytest.raises(BadConfidenceError):
            read_predictions(path)

    def test_empty_objects_is_valid(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text('{"image_id": "1", "api_id": "a", "objects": []}\n')
        records = read_predictions(path)
        assert records[0].objects == ()

    def test_object_without_labels_rejected(self, tmp_path):
        path = tmp_path / "pred.jsonl"
        path.write_text('{"image_id": "1", "api_id": "a", "objects": '
                        '[{"labels": []}]}\n')
        with pytest.raises(ParseError):
            read_predictions(path)

    def test_write_read_round_trip(self, tmp_path):
        records = [street_scene.prediction_record(api) for api in sorted(street_scene.PREDICTIONS)]
        path = tmp_path / "roundtrip.jsonl"
        write_predictions(records, path)
        assert read_predictions(path) == records


class TestTopK:
    def test_tie_keeps_file_order(self):
        record = record_with_confidences([0.9, 0.8, 0.8, 0.1, 0.05])
        kept = top_k(record, 3).objects
        assert [o.synonyms[0] for o in kept] == ["label0", "label1", "label2"]

    def test_k_larger_than_objects(self):
        record = record_with_confidences([0.9, 0.5, 0.1])
        assert len(top_k(record, 5).objects) == 3

    def test_k1_takes_most_confident(self):
        record = record_with_confidences([0.2, 0.9])
        assert top_k(record, 1).objects[0].synonyms == ("label1",)

    def test_absent_confidence_ranks_last(self):
        objects = (PredictedObject(synonyms=("a",), confidence=None),
                   PredictedObject(synonyms=("b",), confidence=0.1),
                   PredictedObject(synonyms=("c",), confidence=None))
        record = PredictionRecord(image_id="i", api_id="x", objects=objects)
        kept = top_k(record, 3).objects
        assert [o.synonyms[0] for o in kept] == ["b", "a", "c"]

    @given(st.lists(st.one_of(st.none(), st.floats(0, 1, allow_nan=False)),
                    max_size=8),
           st.integers(min_value=1, max_value=6))
    def test_idempotent(self, confidences, k):
        record = record_with_confidences(confidences)
        once = top_k(record, k)
        assert top_k(once, k) == once

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            top_k(record_with_confidences([0.5]), 0)


class TestLabelBag:
    def test_prediction_bag_counts_every_synonym(self, fixture_store):
        record = street_scene.prediction_record("mobilenet_v2")
        bag = label_bag(record.objects, fixture_store)
        assert len(bag) == sum(len(o.synonyms) for o in record.objects)
        assert len(bag) == 12

    def test_truth_bag(self, fixture_store):
        bag = label_bag(["car", "tree"], fixture_store)
        assert bag == ["car", "tree"]

    def test_unresolvable_becomes_unknown(self, fixture_store):
        bag = label_bag([PredictedObject(synonyms=("zzqx",))], fixture_store)
        assert bag == [UNKNOWN_TOKEN]

    def test_permutation_tokens_resolve(self, fixture_store):
        bag = label_bag(["parking meter", "lamp post"], fixture_store)
        assert bag == ["Parking_Meter", "lamp_post"]


class TestMetadataStats:
    def test_unknown_object_rate(self, fixture_store):
        objects = [PredictedObject(synonyms=("car",), confidence=0.9)] * 9
        objects.append(PredictedObject(synonyms=("zzqx",), confidence=0.1))
        record = PredictionRecord(image_id="1", api_id="a", objects=tuple(objects))
        unknown_rate, _ = metadata_stats([record], fixture_store, k=10)
        assert unknown_rate == pytest.approx(0.10)

    def test_single_label_objects_mean_one(self, fixture_store):
        record = street_scene.prediction_record("clarifai")
        _, labels_per_object = metadata_stats([record], fixture_store, k=5)
        assert labels_per_object == 1.0

    def test_empty_input(self, fixture_store):
        record = PredictionRecord(image_id="1", api_id="a", objects=())
        with pytest.raises(EmptyInputError):
            metadata_stats([record], fixture_store, k=5)

    def test_object_with_one_known_synonym_is_known(self, fixture_store):
        record = PredictionRecord(
            image_id="1", api_id="a",
            objects=(PredictedObject(synonyms=("zzqx", "car")),))
        unknown_rate, _ = metadata_stats([record], fixture_store, k=5)
        assert unknown_rate == 0.0
