//! Row-major matrices and their binary file format: the magic `NMAT`, then
//! little-endian u32 dtype code (1 = i8, 4 = i32), rows and cols, then the
//! elements in little-endian row-major order.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{MatmulError, Result};

pub const MAGIC: &[u8; 4] = b"NMAT";

pub trait Element: Copy + Default + PartialEq + std::fmt::Debug {
    const CODE: u32;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for i8 {
    const CODE: u32 = 1;
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self as u8);
    }
    fn read_le(bytes: &[u8]) -> Self {
        bytes[0] as i8
    }
}

impl Element for i32 {
    const CODE: u32 = 4;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        i32::from_le_bytes(bytes[..4].try_into().expect("4 bytes"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Element> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MatmulError::InvalidDims(format!(
                "{} elements for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        for v in [T::CODE, self.rows as u32, self.cols as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.data {
            v.write_le(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(MatmulError::Format("missing NMAT header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        let (code, rows, cols) = (word(1), word(2) as usize, word(3) as usize);
        if code != T::CODE {
            return Err(MatmulError::Format(format!(
                "dtype code {code}, expected {}",
                T::CODE
            )));
        }
        let width = T::CODE as usize;
        let body = &bytes[16..];
        if body.len() != rows * cols * width {
            return Err(MatmulError::Format(format!(
                "{} payload bytes for {rows}x{cols}",
                body.len()
            )));
        }
        let data = body.chunks_exact(width).map(T::read_le).collect();
        Ok(Self { rows, cols, data })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

impl Matrix<i8> {
    pub fn random<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random()).collect(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn widen(&self) -> Matrix<i32> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v as i32).collect(),
        }
    }
}
