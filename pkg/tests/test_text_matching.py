import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.services.text_matching import heading_match_score, relevance, token_overlap, tokenize

words = st.lists(st.sampled_from(["ip", "address", "route", "10.0.0.1/24", "rip", "port"]), max_size=8)


def test_tokens_keep_addresses_whole():
    assert tokenize("IP address 10.0.0.1/24 on Gi0/0") == ["ip", "address", "10.0.0.1/24", "on", "gi0/0"]
    assert tokenize("the route to a peer", drop_stopwords=True) == ["route", "peer"]


def test_heading_match_tolerates_spacing_and_abbreviations():
    assert heading_match_score("Message Format", "3.  Message   Format") == 1.0
    assert heading_match_score("Mg Frmt", "Message Format") == pytest.approx(0.8)
    assert 0.75 <= heading_match_score("Mesage Fromat", "Message Format") < 1.0
    assert heading_match_score("zzz", "Message Format") == 0.0


def test_heading_match_requires_equal_numbers():
    # "version 4" and "version 6" share most letters but name different things
    assert heading_match_score("Version 4 Message", "Version 6 Message") == pytest.approx(0.5)
    assert heading_match_score("Version 4 Message", "Version 6 Message") < 0.6
    assert heading_match_score("Appendix B Timers", "Appendix B Timer Values") > 0.9


def test_relevance_counts_prefixes_half():
    assert relevance("configure interface", "configure the interfaces") == 0.75
    assert relevance("", "anything") == 0.0


@given(words, words)
def test_token_overlap_is_symmetric_and_bounded(a, b):
    left, right = " ".join(a), " ".join(b)
    assert token_overlap(left, right) == token_overlap(right, left)
    assert 0.0 <= token_overlap(left, right) <= 1.0
    assert token_overlap(left, left) == 1.0
