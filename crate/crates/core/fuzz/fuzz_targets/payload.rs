#![no_main]

use greenroom::wire::payload::{
    decode_result, decode_status, decode_test_batch, encode_result, encode_status,
};
use greenroom::wire::MAX_PAYLOAD;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_test_batch(data);
    if data.len() > MAX_PAYLOAD {
        return;
    }
    if let Ok(results) = decode_result(data) {
        assert_eq!(encode_result(&results).unwrap(), data);
    }
    if let Ok(status) = decode_status(data) {
        let again = decode_status(&encode_status(&status).unwrap()).unwrap();
        assert_eq!(again.flags(), status.flags());
        assert_eq!(again.readings.len(), status.readings.len());
    }
});
