//! Table and record formats. Every text export starts with a versioned
//! comment line so files identify the tool that wrote them; readers report
//! malformed input with 1-based line numbers.

use std::io::{BufRead, BufReader, Read, Write};

use crate::cavity::WaistScanRow;
use crate::error::{Error, Result};
use crate::fit::{PumpPointData, SpectrumData};
use crate::homodyne::Record;
use crate::squeezing::{LossTable, PumpSweep};

const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn header(kind: &str) -> String {
    format!("# opokit v{VERSION} {kind}")
}

/// Shortest round-trip decimal rendering; keeps CSV rows compact and stable.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

pub fn write_waist_scan(w: &mut impl Write, rows: &[WaistScanRow<f64>]) -> Result<()> {
    writeln!(w, "{}", header("waist-scan"))?;
    writeln!(
        w,
        "d_mm,waist_tangential_um,waist_sagittal_um,stable_t,stable_s"
    )?;
    for row in rows {
        let um = |v: Option<f64>| v.map_or("nan".to_string(), |x| fmt(x * 1e6));
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt(row.distance * 1e3),
            um(row.waist[0]),
            um(row.waist[1]),
            row.waist[0].is_some() as u8,
            row.waist[1].is_some() as u8,
        )?;
    }
    Ok(())
}

/// Spectrum table; either branch may be absent (written as nan). `reliable`
/// marks bins the acquisition chain can be trusted on.
pub fn write_spectrum(
    w: &mut impl Write,
    frequencies: &[f64],
    squeezed_db: Option<&[f64]>,
    antisqueezed_db: Option<&[f64]>,
    reliable: Option<&[bool]>,
) -> Result<()> {
    writeln!(w, "{}", header("spectrum"))?;
    writeln!(w, "freq_MHz,squeezed_dB,antisqueezed_dB,reliable")?;
    for (i, &f) in frequencies.iter().enumerate() {
        let pick = |v: Option<&[f64]>| v.map_or("nan".to_string(), |s| fmt(s[i]));
        writeln!(
            w,
            "{},{},{},{}",
            fmt(f / 1e6),
            pick(squeezed_db),
            pick(antisqueezed_db),
            reliable.map_or(1, |r| r[i] as u8),
        )?;
    }
    Ok(())
}

/// Pump sweep with the theoretical optimum noted in the preamble.
pub fn write_pump_sweep(
    w: &mut impl Write,
    sweep: &PumpSweep<f64>,
    optimum: Option<(f64, f64)>,
) -> Result<()> {
    writeln!(w, "{}", header("pump-sweep"))?;
    writeln!(
        w,
        "# probe frequency {} MHz",
        fmt(sweep.probe_frequency / 1e6)
    )?;
    if let Some((xi, db)) = optimum {
        writeln!(w, "# optimum squeezing {} dB at xi = {}", fmt(db), fmt(xi))?;
    }
    writeln!(w, "P_mW,sqz_dB,antisqz_dB")?;
    for p in &sweep.points {
        writeln!(
            w,
            "{},{},{}",
            fmt(p.pump_power * 1e3),
            fmt(p.squeezed_db),
            fmt(p.antisqueezed_db),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Readers
// ---------------------------------------------------------------------------

struct Lines<'a, R: Read> {
    reader: BufReader<R>,
    buf: String,
    line_no: usize,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<R: Read> Lines<'_, R> {
    fn new(r: R) -> Self {
        Lines {
            reader: BufReader::new(r),
            buf: String::new(),
            line_no: 0,
            _marker: std::marker::PhantomData,
        }
    }

    /// Next non-comment, non-empty line, trimmed.
    fn next_data(&mut self) -> Result<Option<(usize, String)>> {
        loop {
            self.buf.clear();
            let n = self.reader.read_line(&mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Ok(Some((self.line_no, line.to_string())));
        }
    }
}

fn parse_field(raw: &str, line: usize, what: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {what} from '{}'", raw.trim()),
    })
}

fn expect_header(got: &str, want_prefix: &str, line: usize) -> Result<()> {
    let norm = got.replace(' ', "");
    if norm.starts_with(want_prefix) {
        Ok(())
    } else {
        Err(Error::Parse {
            line,
            message: format!("expected header starting with '{want_prefix}', found '{got}'"),
        })
    }
}

/// Read a spectrum table (`freq_MHz,squeezed_dB,antisqueezed_dB[,reliable]`).
pub fn read_spectrum_csv(r: impl Read) -> Result<SpectrumData<f64>> {
    let mut lines = Lines::new(r);
    let (hline, htext) = lines.next_data()?.ok_or(Error::Parse {
        line: 0,
        message: "empty spectrum file".into(),
    })?;
    expect_header(&htext, "freq_MHz,squeezed_dB,antisqueezed_dB", hline)?;
    let mut freqs = Vec::new();
    let mut sq = Vec::new();
    let mut anti = Vec::new();
    let mut mask = Vec::new();
    let mut any_mask = false;
    while let Some((no, line)) = lines.next_data()? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(Error::Parse {
                line: no,
                message: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        freqs.push(parse_field(fields[0], no, "frequency (MHz)")? * 1e6);
        sq.push(parse_field(fields[1], no, "squeezed dB")?);
        anti.push(parse_field(fields[2], no, "anti-squeezed dB")?);
        let ok = match fields.get(3) {
            Some(&raw) => match raw.trim() {
                "1" => true,
                "0" => {
                    any_mask = true;
                    false
                }
                other => {
                    return Err(Error::Parse {
                        line: no,
                        message: format!("reliability flag must be 0 or 1, found '{other}'"),
                    })
                }
            },
            None => true,
        };
        mask.push(ok);
    }
    Ok(SpectrumData {
        frequencies: freqs,
        squeezed_db: Some(sq),
        antisqueezed_db: Some(anti),
        shot_db: None,
        mask: if any_mask { Some(mask) } else { None },
    })
}

/// Read a pump sweep (`P_mW,sqz_dB,antisqz_dB`); powers come back in watts.
pub fn read_pump_csv(r: impl Read) -> Result<Vec<PumpPointData<f64>>> {
    let mut lines = Lines::new(r);
    let (hline, htext) = lines.next_data()?.ok_or(Error::Parse {
        line: 0,
        message: "empty pump-sweep file".into(),
    })?;
    expect_header(&htext, "P_mW,sqz_dB,antisqz_dB", hline)?;
    let mut out = Vec::new();
    while let Some((no, line)) = lines.next_data()? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: no,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let p = parse_field(fields[0], no, "pump power (mW)")? * 1e-3;
        let sq = parse_field(fields[1], no, "squeezed dB")?;
        let anti = parse_field(fields[2], no, "anti-squeezed dB")?;
        out.push(PumpPointData {
            pump_power: p,
            squeezed_db: sq.is_finite().then_some(sq),
            antisqueezed_db: anti.is_finite().then_some(anti),
        });
    }
    Ok(out)
}

/// Read an electronic-loss table (`freq_MHz,loss`).
pub fn read_loss_table(r: impl Read) -> Result<LossTable<f64>> {
    let mut lines = Lines::new(r);
    let (hline, htext) = lines.next_data()?.ok_or(Error::Parse {
        line: 0,
        message: "empty loss table".into(),
    })?;
    expect_header(&htext, "freq_MHz,loss", hline)?;
    let mut points = Vec::new();
    while let Some((no, line)) = lines.next_data()? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: no,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        points.push((
            parse_field(fields[0], no, "frequency (MHz)")? * 1e6,
            parse_field(fields[1], no, "loss")?,
        ));
    }
    LossTable::new(points)
}

// ---------------------------------------------------------------------------
// Binary records
// ---------------------------------------------------------------------------

/// Write a record: one ASCII header line, then little-endian f64 samples.
pub fn write_record(w: &mut impl Write, record: &Record<f64>) -> Result<()> {
    writeln!(
        w,
        "# opokit v{VERSION} record sample_rate_hz={} seed={} params_hash={:016x} highpass_hz={} n={}",
        fmt(record.sample_rate),
        record.seed,
        record.params_hash,
        record.highpass_cutoff.map_or("none".to_string(), fmt),
        record.samples.len(),
    )?;
    for &s in &record.samples {
        w.write_all(&s.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_record(r: impl Read) -> Result<Record<f64>> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let bad = |message: String| Error::Parse { line: 1, message };
    let mut sample_rate = None;
    let mut seed = None;
    let mut hash = None;
    let mut highpass = None;
    let mut n = None;
    if !line.starts_with("# opokit") || !line.contains(" record ") {
        return Err(bad("not an opokit record header".into()));
    }
    for token in line.split_whitespace() {
        if let Some((k, v)) = token.split_once('=') {
            match k {
                "sample_rate_hz" => {
                    sample_rate = Some(
                        v.parse::<f64>()
                            .map_err(|_| bad(format!("bad sample rate '{v}'")))?,
                    )
                }
                "seed" => {
                    seed = Some(
                        v.parse::<u64>()
                            .map_err(|_| bad(format!("bad seed '{v}'")))?,
                    )
                }
                "params_hash" => {
                    hash = Some(
                        u64::from_str_radix(v, 16)
                            .map_err(|_| bad(format!("bad params hash '{v}'")))?,
                    )
                }
                "highpass_hz" => {
                    highpass = if v == "none" {
                        Some(None)
                    } else {
                        Some(Some(
                            v.parse::<f64>()
                                .map_err(|_| bad(format!("bad high-pass '{v}'")))?,
                        ))
                    }
                }
                "n" => {
                    n = Some(
                        v.parse::<usize>()
                            .map_err(|_| bad(format!("bad sample count '{v}'")))?,
                    )
                }
                _ => {}
            }
        }
    }
    let (sample_rate, seed, params_hash, highpass_cutoff, n) =
        match (sample_rate, seed, hash, highpass, n) {
            (Some(a), Some(b), Some(c), Some(d), Some(e)) => (a, b, c, d, e),
            _ => return Err(bad("record header is missing required fields".into())),
        };
    let mut samples = vec![0f64; n];
    let mut buf = [0u8; 8];
    for (i, s) in samples.iter_mut().enumerate() {
        reader.read_exact(&mut buf).map_err(|_| Error::Parse {
            line: 2,
            message: format!("record truncated at sample {i} of {n}"),
        })?;
        *s = f64::from_le_bytes(buf);
    }
    Ok(Record {
        samples,
        sample_rate,
        seed,
        params_hash,
        highpass_cutoff,
    })
}
