//! Golden-fixture parsing: recorded wire responses must parse to the same
//! values on every run, byte for byte at the JSON level and bit for bit at
//! the f64 level.

use framealign::provider::{
    parse_chat_first_tokens, parse_chat_text, parse_embeddings, parse_scored_sequence,
    ProviderError,
};

const COMPLETIONS: &str = include_str!("fixtures/completions_echo.json");
const CHAT: &str = include_str!("fixtures/chat_first_tokens.json");
const EMBEDDINGS: &str = include_str!("fixtures/embeddings.json");

#[test]
fn completions_echo_fixture_parses_to_recorded_values() {
    let (scored, input, output) = parse_scored_sequence(COMPLETIONS).unwrap();
    assert_eq!(scored.text, "The committee reviewed the updated housing proposal before the vote.");
    assert_eq!(scored.tokens.len(), 11);
    assert_eq!(scored.tokens[0].token, "The");
    assert_eq!(scored.tokens[0].logprob, None, "echoed first token has no logprob");
    assert_eq!(scored.tokens[1].logprob, Some(-1.25));

    // All fixture logprobs are dyadic, so the sum is exact.
    let expected: f64 =
        [-1.25, -0.5, -2.0, -0.125, -3.5, -0.75, -1.0, -2.25, -0.375, -4.0].iter().sum();
    assert_eq!(scored.total.value(), expected);
    assert_eq!(expected, -15.75);
    assert_eq!((input, output), (11, 0));
}

#[test]
fn chat_fixture_yields_both_positions_with_chosen_tokens_inserted() {
    let (dist, input, output) = parse_chat_first_tokens(CHAT).unwrap();
    assert_eq!((input, output), (148, 2));

    // Position 1: chosen token appears alongside the reported alternatives.
    let (pos, lp) = dist.lookup("equ").expect("chosen token present");
    assert_eq!(pos, 0);
    assert_eq!(lp, -0.0953);
    assert_eq!(dist.lookup("mis"), Some((0, -2.6094)));

    // Position 2: the chosen token was not in its own top list; the parser
    // must still make it visible.
    assert_eq!(dist.lookup("ality"), Some((1, -0.0112)));
    assert_eq!(dist.lookup("ogyny"), Some((1, -7.25)));

    // A slightly positive reported value is clamped to a valid logprob.
    assert_eq!(dist.lookup("zero"), Some((0, 0.0)));

    // The floor is the worst reported value at the first position.
    assert_eq!(dist.floor(), Some(-6.0));
}

#[test]
fn chat_fixture_text_matches_message_content() {
    let (text, input, output) = parse_chat_text(CHAT).unwrap();
    assert_eq!(text, "equality");
    assert_eq!((input, output), (148, 2));
}

#[test]
fn embeddings_fixture_reorders_by_index() {
    let (vectors, input, output) = parse_embeddings(EMBEDDINGS).unwrap();
    assert_eq!(vectors.len(), 2);
    assert_eq!(vectors[0], vec![1.0, 0.0, -0.25, 0.5]);
    assert_eq!(vectors[1], vec![0.25, -0.5, 0.125, 0.0625]);
    assert_eq!((input, output), (7, 0));
}

#[test]
fn fixture_parses_are_stable_across_repeated_runs() {
    let (first, _, _) = parse_scored_sequence(COMPLETIONS).unwrap();
    let (second, _, _) = parse_scored_sequence(COMPLETIONS).unwrap();
    assert_eq!(first.total.value().to_bits(), second.total.value().to_bits());
    let tokens_first: Vec<_> = first.tokens.iter().map(|t| (&t.token, t.logprob)).collect();
    let tokens_second: Vec<_> = second.tokens.iter().map(|t| (&t.token, t.logprob)).collect();
    assert_eq!(tokens_first, tokens_second);

    let (dist_first, _, _) = parse_chat_first_tokens(CHAT).unwrap();
    let (dist_second, _, _) = parse_chat_first_tokens(CHAT).unwrap();
    assert_eq!(dist_first.positions, dist_second.positions);

    let (emb_first, _, _) = parse_embeddings(EMBEDDINGS).unwrap();
    let (emb_second, _, _) = parse_embeddings(EMBEDDINGS).unwrap();
    assert_eq!(emb_first, emb_second);
}

#[test]
fn truncated_fixture_is_a_protocol_error_not_a_panic() {
    let torn = &COMPLETIONS[..COMPLETIONS.len() / 2];
    match parse_scored_sequence(torn) {
        Err(ProviderError::Protocol(_)) => {}
        other => panic!("expected protocol error, got {other:?}"),
    }
}
