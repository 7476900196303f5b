import json

from hypothesis import given, strategies as st

from impersim.messages import (
    Envelope,
    Origin,
    ProcessorId,
    RoundInbox,
    canonical_payload,
    decode_payload,
    encode_payload,
    processor_ids,
    sort_envelopes,
)


def test_processor_id_tags():
    pid = ProcessorId(3)
    assert pid.tag == "p_3"
    assert pid == ProcessorId(3)
    assert pid != ProcessorId(4)
    assert processor_ids(3) == (ProcessorId(1), ProcessorId(2), ProcessorId(3))


def test_canonical_payload_sorts_and_dedupes():
    items = [("ECHO", ProcessorId(2), 7), ("INPUT", 1), ("ECHO", ProcessorId(2), 7)]
    payload = canonical_payload(items)
    assert len(payload) == 2
    assert payload == canonical_payload(reversed(items))


def test_payload_codec_roundtrip_with_ids():
    payload = canonical_payload(
        [("ECHO", ProcessorId(2), 7), ("VIEW", 0, ((ProcessorId(1), (("INPUT", 1),)),))]
    )
    encoded = encode_payload(payload)
    json.dumps(encoded)  # must be JSON-serializable
    assert decode_payload(encoded) == payload


nested_values = st.recursive(
    st.one_of(
        st.integers(-5, 50),
        st.none(),
        st.builds(ProcessorId, st.integers(1, 9)),
    ),
    lambda inner: st.tuples(inner, inner),
    max_leaves=6,
)
items = st.tuples(st.sampled_from(["INPUT", "ECHO", "X"]), nested_values)


@given(st.lists(items, max_size=6))
def test_codec_roundtrip_property(raw):
    payload = canonical_payload(raw)
    assert decode_payload(encode_payload(payload)) == payload


def test_sort_envelopes_forged_last_on_ties():
    payload = canonical_payload([("INPUT", 1)])
    genuine = Envelope(ProcessorId(1), ProcessorId(2), payload, 1, Origin.GENUINE)
    forged = Envelope(ProcessorId(1), ProcessorId(2), payload, 1, Origin.FORGED)
    assert sort_envelopes([forged, genuine]) == [genuine, forged]


def test_inbox_counts_distinct_senders_not_copies():
    payload = canonical_payload([("INPUT", 5)])
    envs = [
        Envelope(ProcessorId(1), ProcessorId(1), payload, 1, Origin.GENUINE),
        Envelope(ProcessorId(1), ProcessorId(1), payload, 1, Origin.FORGED),
        Envelope(ProcessorId(2), ProcessorId(1), payload, 1, Origin.GENUINE),
    ]
    inbox = RoundInbox.assemble(envs)
    assert len(inbox) == 3
    assert inbox.senders_of(("INPUT", 5)) == frozenset({ProcessorId(1), ProcessorId(2)})
    assert inbox.tag_counts()[ProcessorId(1)] == 2


def test_item_senders_matches_senders_of():
    p1, p2 = ProcessorId(1), ProcessorId(2)
    inbox = RoundInbox(
        (
            (p1, canonical_payload([("A", 1), ("B", 2)])),
            (p2, canonical_payload([("A", 1)])),
        )
    )
    index = inbox.item_senders()
    assert index[("A", 1)] == frozenset({p1, p2})
    assert index[("B", 2)] == frozenset({p1})
    assert inbox.senders_of(("A", 1)) == index[("A", 1)]
