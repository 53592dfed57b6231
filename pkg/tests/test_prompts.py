import pytest
from hypothesis import given
from hypothesis import strategies as st

from alfie.prompts import (
    DEFAULT_EXCLUSION,
    extract_nouns,
    load_exclusion_file,
    select_noun_spans,
    tokenize,
)


class TestTokenize:
    def test_simple_prompt(self):
        assert tokenize("A green dragon") == ["a", "green", "dragon"]

    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_split(self):
        assert tokenize("dog, jacket!") == ["dog", ",", "jacket", "!"]

    def test_hyphenated_word_stays_whole(self):
        assert tokenize("a close-up shot") == ["a", "close-up", "shot"]


class TestExtractNouns:
    def test_generic_noun_excluded(self):
        nouns = extract_nouns("A photo of a bullmastiff with a jacket")
        assert set(nouns.surfaces) == {"bullmastiff", "jacket"}
        assert "photo" not in nouns.surfaces

    def test_override(self):
        nouns = extract_nouns("A green dragon", override=["dragon"])
        assert nouns.surfaces == ("dragon",)
        assert nouns.spans == ((2, 3, "dragon"),)

    def test_all_generic_warns_and_returns_empty(self):
        with pytest.warns(UserWarning):
            nouns = extract_nouns("An image of a picture")
        assert nouns.spans == ()

    def test_override_absent_names_token(self):
        with pytest.raises(ValueError, match="unicorn"):
            extract_nouns("A green dragon", override=["unicorn"])

    def test_case_invariance(self):
        lower = extract_nouns("a photo of a bullmastiff")
        upper = extract_nouns("A PHOTO OF A BULLMASTIFF")
        assert lower.spans == upper.spans

    def test_surfaces_never_in_exclusion(self):
        nouns = extract_nouns("an illustration of a robot in a scene")
        assert not set(nouns.surfaces) & DEFAULT_EXCLUSION
        assert nouns.surfaces == ("robot",)

    def test_multiword_override_span(self):
        nouns = extract_nouns("A big green dragon flying", override=["green dragon"])
        assert nouns.spans == ((2, 4, "green dragon"),)

    def test_override_mode_ignores_heuristic(self):
        # 'photo' is excluded by default, but an explicit override wins
        nouns = extract_nouns("A photo of a dog", override=["photo"])
        assert nouns.surfaces == ("photo",)

    def test_custom_exclusion_file(self, tmp_path):
        path = tmp_path / "excl.txt"
        path.write_text("dragon\n\nphoto\n")
        excl = load_exclusion_file(str(path))
        assert excl == frozenset({"dragon", "photo"})
        with pytest.warns(UserWarning):
            nouns = extract_nouns("A photo of a dragon", exclusion=excl)
        assert nouns.spans == ()

    @given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=60))
    def test_case_invariance_property(self, prompt):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            assert extract_nouns(prompt).spans == extract_nouns(prompt.upper()).spans


class TestSelectNounSpans:
    def test_operates_on_given_tokens(self):
        spans = select_noun_spans(["a", "robot", "photo"])
        assert spans.surfaces == ("robot",)

    def test_override_on_tokens(self):
        spans = select_noun_spans(["a", "robot"], override=["robot"])
        assert spans.spans == ((1, 2, "robot"),)
