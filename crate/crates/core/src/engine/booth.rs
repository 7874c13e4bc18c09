//! Radix-4 (modified) Booth recoding multiplier, behavioural model.

/// Recodes an unsigned 32-bit multiplier into 17 radix-4 digits in `-2..=2`,
/// least significant first. Digit `i` comes from the bit triplet
/// `(y[2i+1], y[2i], y[2i-1])` with `y[-1] = 0` and zero extension above.
pub fn booth_digits(y: u32) -> [i8; 17] {
    let y = y as u64;
    let bit = |i: i64| if i < 0 { 0 } else { ((y >> i) & 1) as i8 };
    let mut digits = [0i8; 17];
    for (i, d) in digits.iter_mut().enumerate() {
        let i = i as i64;
        *d = -2 * bit(2 * i + 1) + bit(2 * i) + bit(2 * i - 1);
    }
    digits
}

/// `x * y` by summing the Booth partial products `digit_i * x * 4^i`.
pub fn booth_radix4_multiply(x: u32, y: u32) -> u64 {
    let total: i128 = booth_digits(y)
        .iter()
        .enumerate()
        .map(|(i, &d)| (d as i128 * x as i128) << (2 * i))
        .sum();
    total as u64
}
