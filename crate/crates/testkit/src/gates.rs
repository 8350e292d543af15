//! Dense 8x8 gate-matrix oracle for the three-qubit preparation circuit.
//!
//! Basis ordering is |q1 q2 q3> with q1 the leftmost label, i.e. index
//! 4*q1 + 2*q2 + q3. All gates in the circuit (Y rotations and CNOTs) are
//! real orthogonal matrices, so the oracle works in plain f64.

pub type Mat8 = [[f64; 8]; 8];

pub fn identity() -> Mat8 {
    let mut m = [[0.0; 8]; 8];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn matmul(a: &Mat8, b: &Mat8) -> Mat8 {
    let mut c = [[0.0; 8]; 8];
    for i in 0..8 {
        for k in 0..8 {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..8 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// Embed Ry(theta) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]] acting on
/// a single qubit (1-based label, 1 = most significant).
pub fn ry_on(qubit: usize, theta: f64) -> Mat8 {
    assert!((1..=3).contains(&qubit));
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    let bit = 3 - qubit; // qubit 1 -> bit 2 (MSB)
    let mut m = [[0.0; 8]; 8];
    for col in 0..8usize {
        let b = (col >> bit) & 1;
        let flipped = col ^ (1 << bit);
        if b == 0 {
            m[col][col] += c;
            m[flipped][col] += s;
        } else {
            m[col][col] += c;
            m[flipped][col] += -s;
        }
    }
    m
}

/// CNOT with the given control and target qubit labels (1-based).
pub fn cnot(control: usize, target: usize) -> Mat8 {
    assert!(control != target);
    let cb = 3 - control;
    let tb = 3 - target;
    let mut m = [[0.0; 8]; 8];
    for col in 0..8usize {
        let row = if (col >> cb) & 1 == 1 { col ^ (1 << tb) } else { col };
        m[row][col] = 1.0;
    }
    m
}

/// Full circuit U = C_2^1 Ry_2(theta2) C_1^3 Ry_1(theta1) applied to |000>.
pub fn prepare_oracle(theta1: f64, theta2: f64) -> [f64; 8] {
    let mut u = identity();
    // Right-to-left application: build U by left-multiplying each gate.
    for gate in [
        ry_on(1, theta1),
        cnot(1, 3),
        ry_on(2, theta2),
        cnot(2, 1),
    ] {
        u = matmul(&gate, &u);
    }
    let mut out = [0.0; 8];
    for (i, row) in u.iter().enumerate() {
        out[i] = row[0];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_angles_stay_in_vacuum() {
        let amps = prepare_oracle(0.0, 0.0);
        assert!((amps[0] - 1.0).abs() < 1e-15);
        assert!(amps[1..].iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn corner_states() {
        // theta = (pi, 0): Ry_1 flips q1, CNOT 1->3 copies it -> |101>.
        let amps = prepare_oracle(std::f64::consts::PI, 0.0);
        assert!((amps[0b101].abs() - 1.0).abs() < 1e-12);
        // theta = (pi, pi) -> |011>.
        let amps = prepare_oracle(std::f64::consts::PI, std::f64::consts::PI);
        assert!((amps[0b011].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_is_one_everywhere() {
        let mut x = 0.38205_f64;
        for _ in 0..200 {
            x = (x * 997.0).fract();
            let t1 = x * 12.0 - 6.0;
            let t2 = (x * 31.0).fract() * 12.0 - 6.0;
            let amps = prepare_oracle(t1, t2);
            let norm: f64 = amps.iter().map(|a| a * a).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
