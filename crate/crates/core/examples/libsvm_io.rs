//! libsvm text and the compact quantized format, both round-tripped in memory.

use wildtamer::data_io::{
    gen_synthetic_logistic, parse_libsvm, quantize_dataset, write_libsvm, QuantizedDataset,
};
use wildtamer::fixedpoint::{storage_scale, Bits};

fn main() -> wildtamer::Result<()> {
    let (data, _) = gen_synthetic_logistic(100, 500, 8, 2)?;
    let mut text = Vec::new();
    write_libsvm(&data, &mut text)?;
    let back = parse_libsvm(&text[..], Some(data.dim))?;
    assert_eq!(back, data);
    println!(
        "libsvm: {} bytes, first line {:?}",
        text.len(),
        String::from_utf8_lossy(&text[..60])
    );

    let spec = storage_scale(data.max_abs_value(), Bits::Eight)?;
    let q = quantize_dataset(&data, &spec, 9)?;
    let mut bin = Vec::new();
    q.write(&mut bin)?;
    let q2 = QuantizedDataset::read(&bin[..])?;
    assert_eq!(q2, q);
    println!(
        "8-bit: {} bytes, scale {:.3e}, saturated {}",
        bin.len(),
        spec.scale,
        q.stats.saturated
    );
    Ok(())
}
