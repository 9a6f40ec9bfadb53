#![no_main]

use greenroom::wire::{decode_stream, encode_frame};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let decoded = decode_stream(data);
    for frame in &decoded.frames {
        // Anything accepted must re-encode to a stream that decodes to itself.
        let again = decode_stream(&encode_frame(frame));
        assert_eq!(again.frames.as_slice(), std::slice::from_ref(frame));
    }
});
