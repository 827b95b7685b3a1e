//! In-memory labeled frame sets and the portable `.amcd` container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "AMCD" | u16 version | u32 frame_len | u32 frame_count | u8 class_count
//! class_count x (u8 len | UTF-8 name)
//! u8 domain (0 = time, 1 = freq) | f64 snr_db | u64 seed
//! frame_count x (u8 label | frame_len x f32 I | frame_len x f32 Q)
//! optional trailer: "ATRK" | u32 len | JSON attack record
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::AttackConfig;
use crate::error::{AmcError, Result};

pub const AMCD_MAGIC: &[u8; 4] = b"AMCD";
pub const AMCD_VERSION: u16 = 1;
pub const ATTACK_TRAILER_TAG: &[u8; 4] = b"ATRK";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Freq,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Domain::Time => 0,
            Domain::Freq => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Domain::Time),
            1 => Ok(Domain::Freq),
            other => Err(AmcError::Format(format!("unknown domain tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Time => "time",
            Domain::Freq => "freq",
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Domain {
    type Err = AmcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time" | "iq" => Ok(Domain::Time),
            "freq" | "frequency" => Ok(Domain::Freq),
            other => Err(AmcError::Config(format!(
                "unknown domain '{other}' (expected time or freq)"
            ))),
        }
    }
}

/// Provenance of a perturbed dataset, stored as the `.amcd` trailer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackRecord {
    pub config: AttackConfig,
    pub surrogate_architecture: String,
    pub surrogate_checksum: String,
    pub zero_gradient_frames: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    frame_len: usize,
    class_names: Vec<String>,
    domain: Domain,
    snr_db: f64,
    seed: u64,
    /// `count x frame_len x 2`, row-major.
    frames: Vec<f32>,
    labels: Vec<u8>,
    attack: Option<AttackRecord>,
}

impl LabeledDataset {
    pub fn new(
        frame_len: usize,
        class_names: Vec<String>,
        domain: Domain,
        snr_db: f64,
        seed: u64,
        frames: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        if frame_len == 0 {
            return Err(AmcError::Input("frame_len must be positive".into()));
        }
        if class_names.is_empty() || class_names.len() > u8::MAX as usize {
            return Err(AmcError::Input(format!(
                "class count must be in 1..=255, got {}",
                class_names.len()
            )));
        }
        if frames.len() != labels.len() * frame_len * 2 {
            return Err(AmcError::Shape(format!(
                "{} labels need {} frame values, got {}",
                labels.len(),
                labels.len() * frame_len * 2,
                frames.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_names.len()) {
            return Err(AmcError::Input(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(LabeledDataset {
            frame_len,
            class_names,
            domain,
            snr_db,
            seed,
            frames,
            labels,
            attack: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn frames(&self) -> &[f32] {
        &self.frames
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn frame(&self, index: usize) -> &[f32] {
        let width = self.frame_len * 2;
        &self.frames[index * width..(index + 1) * width]
    }

    pub fn attack(&self) -> Option<&AttackRecord> {
        self.attack.as_ref()
    }

    pub fn set_attack(&mut self, record: Option<AttackRecord>) {
        self.attack = record;
    }

    /// Same metadata, new frame values and domain. Labels and order are kept.
    pub fn with_frames(&self, frames: Vec<f32>, domain: Domain) -> Result<Self> {
        let mut out = LabeledDataset::new(
            self.frame_len,
            self.class_names.clone(),
            domain,
            self.snr_db,
            self.seed,
            frames,
            self.labels.clone(),
        )?;
        out.attack = self.attack.clone();
        Ok(out)
    }

    /// Frames at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let width = self.frame_len * 2;
        let mut frames = Vec::with_capacity(indices.len() * width);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(AmcError::Input(format!(
                    "index {i} out of range for {} frames",
                    self.len()
                )));
            }
            frames.extend_from_slice(self.frame(i));
            labels.push(self.labels[i]);
        }
        let mut out = LabeledDataset::new(
            self.frame_len,
            self.class_names.clone(),
            self.domain,
            self.snr_db,
            self.seed,
            frames,
            labels,
        )?;
        out.attack = self.attack.clone();
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let count = u32::try_from(self.len())
            .map_err(|_| AmcError::Input("too many frames for the .amcd format".into()))?;
        let frame_len = u32::try_from(self.frame_len)
            .map_err(|_| AmcError::Input("frame_len too large for the .amcd format".into()))?;
        w.write_all(AMCD_MAGIC)?;
        w.write_all(&AMCD_VERSION.to_le_bytes())?;
        w.write_all(&frame_len.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        w.write_all(&[self.class_names.len() as u8])?;
        for name in &self.class_names {
            let bytes = name.as_bytes();
            let len = u8::try_from(bytes.len())
                .map_err(|_| AmcError::Input(format!("class name '{name}' is too long")))?;
            w.write_all(&[len])?;
            w.write_all(bytes)?;
        }
        w.write_all(&[self.domain.tag()])?;
        w.write_all(&self.snr_db.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;

        let mut block = Vec::with_capacity(1 + self.frame_len * 8);
        for (i, &label) in self.labels.iter().enumerate() {
            block.clear();
            block.push(label);
            let frame = self.frame(i);
            for iq in frame.chunks_exact(2) {
                block.extend_from_slice(&iq[0].to_le_bytes());
            }
            for iq in frame.chunks_exact(2) {
                block.extend_from_slice(&iq[1].to_le_bytes());
            }
            w.write_all(&block)?;
        }

        if let Some(record) = &self.attack {
            let json = serde_json::to_vec(record)?;
            w.write_all(ATTACK_TRAILER_TAG)?;
            w.write_all(&(json.len() as u32).to_le_bytes())?;
            w.write_all(&json)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail for a validated dataset");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != AMCD_MAGIC {
            return Err(AmcError::Format("missing AMCD magic".into()));
        }
        let version = cur.u16()?;
        if version != AMCD_VERSION {
            return Err(AmcError::Version {
                what: ".amcd",
                found: version as u32,
                expected: AMCD_VERSION as u32,
            });
        }
        let frame_len = cur.u32()? as usize;
        let count = cur.u32()? as usize;
        let class_count = cur.u8()? as usize;
        let mut class_names = Vec::with_capacity(class_count);
        for _ in 0..class_count {
            let len = cur.u8()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| AmcError::Format("class name is not UTF-8".into()))?;
            class_names.push(name.to_string());
        }
        let domain = Domain::from_tag(cur.u8()?)?;
        let snr_db = f64::from_le_bytes(cur.array()?);
        let seed = u64::from_le_bytes(cur.array()?);

        let needed = count
            .checked_mul(1 + frame_len * 8)
            .ok_or_else(|| AmcError::Format("frame table size overflows".into()))?;
        if cur.remaining() < needed {
            return Err(AmcError::Format(format!(
                "truncated frame table: need {needed} bytes, have {}",
                cur.remaining()
            )));
        }
        let mut frames = vec![0f32; count * frame_len * 2];
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            labels.push(cur.u8()?);
            let frame = &mut frames[i * frame_len * 2..(i + 1) * frame_len * 2];
            for k in 0..frame_len {
                frame[2 * k] = f32::from_le_bytes(cur.array()?);
            }
            for k in 0..frame_len {
                frame[2 * k + 1] = f32::from_le_bytes(cur.array()?);
            }
        }

        let attack = if cur.remaining() == 0 {
            None
        } else {
            if cur.take(4)? != ATTACK_TRAILER_TAG {
                return Err(AmcError::Format("unrecognized trailer block".into()));
            }
            let len = cur.u32()? as usize;
            let record: AttackRecord = serde_json::from_slice(cur.take(len)?)?;
            if cur.remaining() != 0 {
                return Err(AmcError::Format("trailing bytes after attack record".into()));
            }
            Some(record)
        };

        let mut ds = LabeledDataset::new(frame_len, class_names, domain, snr_db, seed, frames, labels)
            .map_err(|e| AmcError::Format(e.to_string()))?;
        ds.attack = attack;
        Ok(ds)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| {
            AmcError::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(AmcError::Format(format!(
                "unexpected end of file at byte {}",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> LabeledDataset {
        LabeledDataset::new(
            2,
            vec!["A".into(), "B".into()],
            Domain::Time,
            18.0,
            7,
            vec![1.0, 2.0, 3.0, 4.0, -1.0, -2.0, -3.0, -4.0],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn header_layout_is_exact() {
        let bytes = tiny().to_bytes();
        assert_eq!(&bytes[0..4], b"AMCD");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(bytes[14], 2);
        assert_eq!(&bytes[15..17], &[1, b'A']);
        assert_eq!(&bytes[17..19], &[1, b'B']);
        assert_eq!(bytes[19], 0);
        assert_eq!(&bytes[20..28], &18f64.to_le_bytes());
        assert_eq!(&bytes[28..36], &7u64.to_le_bytes());
        // first frame: label, I block, Q block
        assert_eq!(bytes[36], 0);
        assert_eq!(&bytes[37..41], &1f32.to_le_bytes());
        assert_eq!(&bytes[41..45], &3f32.to_le_bytes());
        assert_eq!(&bytes[45..49], &2f32.to_le_bytes());
        assert_eq!(bytes.len(), 36 + 2 * (1 + 16));
    }

    #[test]
    fn rejects_corrupt_files() {
        let bytes = tiny().to_bytes();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            LabeledDataset::from_bytes(&bad_magic),
            Err(AmcError::Format(_))
        ));
        let mut bad_version = bytes.clone();
        bad_version[4] = 9;
        assert!(matches!(
            LabeledDataset::from_bytes(&bad_version),
            Err(AmcError::Version { found: 9, .. })
        ));
        assert!(matches!(
            LabeledDataset::from_bytes(&bytes[..bytes.len() - 1]),
            Err(AmcError::Format(_))
        ));
        let mut junk = bytes.clone();
        junk.extend_from_slice(b"JUNK");
        assert!(LabeledDataset::from_bytes(&junk).is_err());
        let mut bad_label = bytes;
        bad_label[36] = 5;
        assert!(LabeledDataset::from_bytes(&bad_label).is_err());
    }

    #[test]
    fn constructor_validates() {
        assert!(LabeledDataset::new(2, vec!["A".into()], Domain::Time, 0.0, 0, vec![0.0; 3], vec![0]).is_err());
        assert!(LabeledDataset::new(2, vec!["A".into()], Domain::Time, 0.0, 0, vec![0.0; 4], vec![1]).is_err());
        let empty = LabeledDataset::new(2, vec!["A".into()], Domain::Freq, 0.0, 0, vec![], vec![]).unwrap();
        assert!(empty.is_empty());
        assert_eq!(LabeledDataset::from_bytes(&empty.to_bytes()).unwrap(), empty);
    }

    #[test]
    fn subset_keeps_order() {
        let ds = tiny();
        let sub = ds.subset(&[1, 0]).unwrap();
        assert_eq!(sub.labels(), &[1, 0]);
        assert_eq!(sub.frame(0), ds.frame(1));
        assert!(ds.subset(&[2]).is_err());
    }

    proptest! {
        #[test]
        fn amcd_round_trips_bit_exactly(
            frame_len in 1usize..6,
            raw in proptest::collection::vec((0u8..3, proptest::collection::vec(any::<u32>(), 12)), 0..5),
            snr in -20.0f64..40.0,
            seed in any::<u64>(),
            freq in any::<bool>(),
        ) {
            let mut frames = Vec::new();
            let mut labels = Vec::new();
            for (label, words) in &raw {
                labels.push(*label);
                frames.extend(words.iter().cycle().take(frame_len * 2).map(|&w| f32::from_bits(w)));
            }
            let domain = if freq { Domain::Freq } else { Domain::Time };
            let ds = LabeledDataset::new(
                frame_len,
                vec!["CPFSK".into(), "GFSK".into(), "PAM4".into()],
                domain, snr, seed, frames, labels,
            ).unwrap();
            let back = LabeledDataset::from_bytes(&ds.to_bytes()).unwrap();
            let bits = |d: &LabeledDataset| d.frames().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&ds));
            prop_assert_eq!(back.labels(), ds.labels());
            prop_assert_eq!(back.domain(), domain);
            prop_assert_eq!(back.seed(), seed);
            prop_assert_eq!(back.snr_db().to_bits(), snr.to_bits());
            prop_assert_eq!(back.to_bytes(), ds.to_bytes());
        }
    }
}
