mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ucore::cluster::codec::{read_frame, write_frame};
use ucore::cluster::{decode_frame, encode_frame, CodecError};

#[test]
fn golden_frames_encode_bit_exact() {
    let corpus = common::golden_frames();
    assert_eq!(corpus.len(), 11);
    for (name, bytes) in corpus {
        let msg = common::golden_message(&name);
        assert_eq!(encode_frame(&msg), bytes, "{name}");
        assert_eq!(decode_frame(&bytes).unwrap(), msg, "{name}");
    }
}

#[test]
fn golden_stream_reads_back_in_order() {
    let corpus = common::golden_frames();
    let stream: Vec<u8> = corpus.iter().flat_map(|(_, b)| b.clone()).collect();
    let mut r = stream.as_slice();
    for (name, _) in &corpus {
        assert_eq!(read_frame(&mut r).unwrap(), common::golden_message(name));
    }
    assert!(r.is_empty());
}

#[test]
fn oversized_length_is_refused_before_reading() {
    let mut r: &[u8] = &[0x7f, 0xff, 0xff, 0xff, 1, 7];
    assert!(matches!(read_frame(&mut r), Err(CodecError::FrameTooLarge { .. })));
}

proptest! {
    #[test]
    fn random_messages_roundtrip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let msg = common::random_message(&mut rng);
        let bytes = encode_frame(&msg);
        prop_assert_eq!(decode_frame(&bytes).unwrap(), msg.clone());
        let mut out = Vec::new();
        write_frame(&mut out, &msg).unwrap();
        prop_assert_eq!(out, bytes);
    }

    #[test]
    fn decoding_garbage_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_frame(&bytes);
    }

    #[test]
    fn truncated_frames_are_errors(seed in any::<u64>(), cut in any::<prop::sample::Index>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bytes = encode_frame(&common::random_message(&mut rng));
        let cut = cut.index(bytes.len());
        prop_assert!(decode_frame(&bytes[..cut]).is_err());
    }
}
