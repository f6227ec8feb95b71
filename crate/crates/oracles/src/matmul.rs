/// Naive triple loop over row-major int8 operands with i64 accumulation,
/// narrowed to i32 at the end (the tested shapes cannot overflow i32).
pub fn naive_i8(a: &[i8], b: &[i8], m: usize, k: usize, n: usize) -> Vec<i32> {
    let mut c = vec![0i32; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0i64;
            for p in 0..k {
                acc += a[i * k + p] as i64 * b[p * n + j] as i64;
            }
            c[i * n + j] = i32::try_from(acc).expect("fits i32");
        }
    }
    c
}
