//! Bit-exact field persistence with a JSON sidecar, and the errors on damaged files.

use kinlaw::io::{read_field, read_field_expect, write_field, AxisMeta, Field};

fn main() -> kinlaw::error::Result<()> {
    let dir = std::env::temp_dir().join("kinlaw_field_io");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("demo");
    let data: Vec<f64> = (0..12).map(|k| (k as f64).sqrt().sin()).collect();
    let field = Field::new(vec![AxisMeta::index("t", 3), AxisMeta::with_coords("x", vec![0.0, 0.25, 0.5, 0.75])], data)?;
    write_field(&path, &field)?;
    let back = read_field(&path)?;
    println!("bit-identical: {}", field.data.iter().zip(&back.data).all(|(a, b)| a.to_bits() == b.to_bits()));
    let wrong = [AxisMeta::index("t", 3), AxisMeta::index("x", 5)];
    println!("mismatch: {}", read_field_expect(&path, &wrong).unwrap_err());
    let bin = path.with_extension("bin");
    let bytes = std::fs::read(&bin)?;
    std::fs::write(&bin, &bytes[..bytes.len() - 8])?;
    println!("truncated: {}", read_field(&path).unwrap_err());
    Ok(())
}
