//! Plane-wave response of a small planar array.
//!
//! Run with `cargo run --example array_response`.

use rsls::geometry::{array_response, Direction, UpaGeometry};

fn main() -> rsls::Result<()> {
    let geom = UpaGeometry::from_wavelengths(4, 2, 0.5, 0.1)?;
    let dir = Direction::new(30f64.to_radians(), 10f64.to_radians())?;
    let a = array_response(&geom, dir);
    println!("antenna  position (m)                 response");
    for (m, (pos, z)) in geom.positions().zip(a.entries().iter()).enumerate() {
        println!(
            "{:>7}  [{:.3}, {:.3}, {:.3}]   {:+.4} {:+.4}j",
            m + 1,
            pos[0],
            pos[1],
            pos[2],
            z.re,
            z.im
        );
    }
    Ok(())
}
