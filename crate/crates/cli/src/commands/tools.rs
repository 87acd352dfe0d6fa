//! `infer`, `landscape`, `sample`, and `gradcheck`.

use super::Outcome;
use ebmlab::archive::{ArchivedModel, ModelArchive};
use ebmlab::csv::{atomic_write, g17};
use ebmlab::ellipse::FreeEnergyMode;
use ebmlab::energy::{infer_y, InferenceConfig};
use ebmlab::grid::GridSpec;
use ebmlab::{EbmError, EbmResult, Tensor};
use std::path::{Path, PathBuf};

fn parse_vec(text: &str, what: &str) -> EbmResult<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| EbmError::invalid(what, format!("{f:?}: {e}")))
        })
        .collect()
}

fn parse_res(text: &str) -> EbmResult<Vec<usize>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse::<usize>()
                .map_err(|e| EbmError::invalid("res", format!("{f:?}: {e}")))
        })
        .collect()
}

fn parse_bits(text: &str) -> EbmResult<Vec<u8>> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(EbmError::invalid("bits", format!("bad character {other:?}"))),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn infer(
    archive: &Path,
    xs: &[f64],
    points: &[String],
    bits: &[String],
    lo: &str,
    hi: &str,
    grid: usize,
    mode: &str,
    beta: f64,
    out: Option<&str>,
) -> EbmResult<Outcome> {
    let archive = ModelArchive::load(archive)?;
    let mut rows = Vec::new();
    match &archive.model {
        ArchivedModel::MlpEnergy(model) => {
            if xs.is_empty() {
                return Err(EbmError::invalid("infer", "pass at least one --x"));
            }
            let lo = parse_vec(lo, "lo")?;
            let hi = parse_vec(hi, "hi")?;
            let cfg = InferenceConfig {
                grid: vec![grid],
                ..InferenceConfig::default()
            };
            rows.push("x,y,F".to_string());
            for &x in xs {
                let min = infer_y(model, &Tensor::vector(vec![x]), &lo, &hi, &cfg)?;
                rows.push(format!("{},{},{}", g17(x), g17(min.point[0]), g17(min.energy)));
            }
        }
        ArchivedModel::Ellipse(model) => {
            if points.is_empty() {
                return Err(EbmError::invalid("infer", "pass at least one --point a,b"));
            }
            let fe_mode = match mode {
                "min" => FreeEnergyMode::Min,
                "marginal" => FreeEnergyMode::Marginal { beta },
                other => {
                    return Err(EbmError::invalid(
                        "mode",
                        format!("expected min or marginal, got {other:?}"),
                    ))
                }
            };
            rows.push("x,y,F".to_string());
            for p in points {
                let v = parse_vec(p, "point")?;
                if v.len() != 2 {
                    return Err(EbmError::invalid("point", "expected two coordinates"));
                }
                let f = model.free_energy(&[v[0], v[1]], fe_mode)?;
                rows.push(format!("{},{},{}", g17(v[0]), g17(v[1]), g17(f)));
            }
        }
        ArchivedModel::Boltzmann(m) => {
            if bits.is_empty() {
                return Err(EbmError::invalid("infer", "pass at least one --bits"));
            }
            rows.push("state,F".to_string());
            for b in bits {
                let y = parse_bits(b)?;
                let f = m.free_energy(&y)?;
                rows.push(format!("{b},{}", g17(f)));
            }
        }
        ArchivedModel::DenoisingAe(model) => {
            if points.is_empty() {
                return Err(EbmError::invalid("infer", "pass at least one --point a,b"));
            }
            rows.push("x,y,F".to_string());
            for p in points {
                let v = parse_vec(p, "point")?;
                let f = model.energy(&v);
                rows.push(format!("{},{},{}", g17(v[0]), g17(v[1]), g17(f)));
            }
        }
        other => {
            return Err(EbmError::invalid(
                "infer",
                format!("no inference routine for archive kind {:?}", other.kind()),
            ))
        }
    }
    let text = rows.join("\n") + "\n";
    print!("{text}");
    if let Some(out) = out {
        atomic_write(&PathBuf::from(out).join("infer.csv"), &text)?;
    }
    Ok(Outcome::Success)
}

/// Energy landscape over a rectangular grid, row-major, one coordinate
/// column per dimension then the energy, 17 significant digits.
pub fn landscape(
    archive: &Path,
    lo: &str,
    hi: &str,
    res: &str,
    mode: &str,
    beta: f64,
    out: &str,
) -> EbmResult<Outcome> {
    let archive = ModelArchive::load(archive)?;
    let lo = parse_vec(lo, "lo")?;
    let hi = parse_vec(hi, "hi")?;
    let res = parse_res(res)?;
    let grid = GridSpec::new(lo, hi, res)?;
    let energy_of: Box<dyn Fn(&[f64]) -> EbmResult<f64>> = match &archive.model {
        ArchivedModel::MlpEnergy(model) => {
            let (dx, dy) = model.dims();
            if grid.dim() != dx + dy {
                return Err(EbmError::invalid(
                    "landscape",
                    format!("grid must have {} dimensions", dx + dy),
                ));
            }
            let model = model.clone();
            Box::new(move |p: &[f64]| {
                use ebmlab::energy::EnergyModel;
                let (dx, _) = model.dims();
                model.energy(
                    &Tensor::vector(p[..dx].to_vec()),
                    &Tensor::vector(p[dx..].to_vec()),
                )
            })
        }
        ArchivedModel::Ellipse(model) => {
            if grid.dim() != 2 {
                return Err(EbmError::invalid("landscape", "ellipse grids are 2-D"));
            }
            let fe_mode = match mode {
                "min" => FreeEnergyMode::Min,
                "marginal" => FreeEnergyMode::Marginal { beta },
                other => {
                    return Err(EbmError::invalid(
                        "mode",
                        format!("expected min or marginal, got {other:?}"),
                    ))
                }
            };
            let model = model.clone();
            Box::new(move |p: &[f64]| model.free_energy(&[p[0], p[1]], fe_mode))
        }
        ArchivedModel::DenoisingAe(model) => {
            if grid.dim() != model.dim() {
                return Err(EbmError::invalid(
                    "landscape",
                    format!("grid must have {} dimensions", model.dim()),
                ));
            }
            let model = model.clone();
            Box::new(move |p: &[f64]| Ok(model.energy(p)))
        }
        other => {
            return Err(EbmError::invalid(
                "landscape",
                format!("no landscape for archive kind {:?}", other.kind()),
            ))
        }
    };

    let text = landscape_csv(&grid, energy_of.as_ref())?;
    atomic_write(&PathBuf::from(out).join("landscape.csv"), &text)?;
    Ok(Outcome::Success)
}

pub fn landscape_csv(
    grid: &GridSpec,
    energy_of: &dyn Fn(&[f64]) -> EbmResult<f64>,
) -> EbmResult<String> {
    let header = match grid.dim() {
        1 => "x,F",
        2 => "x,y,F",
        3 => "x,y,z,F",
        d => {
            return Err(EbmError::invalid(
                "landscape",
                format!("grids with {d} dimensions are not exportable"),
            ))
        }
    };
    let mut text = String::from(header);
    text.push('\n');
    for i in 0..grid.len() {
        let p = grid.point(i);
        let f = energy_of(&p)?;
        let mut fields: Vec<String> = p.iter().map(|&v| g17(v)).collect();
        fields.push(g17(f));
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    Ok(text)
}

pub fn sample(
    archive: &Path,
    sweeps: usize,
    burn_in: usize,
    seed: u64,
    out: &str,
) -> EbmResult<Outcome> {
    let archive = ModelArchive::load(archive)?;
    let ArchivedModel::Boltzmann(machine) = &archive.model else {
        return Err(EbmError::invalid(
            "sample",
            "sampling needs a Boltzmann archive",
        ));
    };
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let n_v = machine.visible_units();
    let n_h = machine.hidden_units();
    let mut y: Vec<u8> = (0..n_v)
        .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
        .collect();
    let mut z: Vec<u8> = (0..n_h)
        .map(|_| if rng.random::<f64>() < 0.5 { 1 } else { 0 })
        .collect();
    for _ in 0..burn_in {
        machine.sweep_hidden(&y, &mut z, &mut rng);
        machine.sweep_visible(&mut y, &z, &mut rng);
    }
    let mut counts = vec![0u64; 1 << n_v];
    let mut samples = String::new();
    for _ in 0..sweeps {
        machine.sweep_hidden(&y, &mut z, &mut rng);
        machine.sweep_visible(&mut y, &z, &mut rng);
        let mut code = 0usize;
        for (b, &v) in y.iter().enumerate() {
            code |= (v as usize) << b;
        }
        counts[code] += 1;
        for &v in &y {
            samples.push(if v == 1 { '1' } else { '0' });
        }
        samples.push('\n');
    }
    let out_dir = PathBuf::from(out);
    atomic_write(&out_dir.join("samples.txt"), &samples)?;

    let exact_ok = n_v + n_h <= 20;
    let mut freq = String::from(if exact_ok {
        "state,frequency,exact_probability\n"
    } else {
        "state,frequency\n"
    });
    for (code, count) in counts.iter().enumerate() {
        let state: String = (0..n_v)
            .map(|b| if code >> b & 1 == 1 { '1' } else { '0' })
            .collect();
        let frequency = *count as f64 / sweeps as f64;
        if exact_ok {
            let yv: Vec<u8> = (0..n_v).map(|b| (code >> b & 1) as u8).collect();
            let exact = machine.visible_probability(&yv)?;
            freq.push_str(&format!("{state},{},{}\n", g17(frequency), g17(exact)));
        } else {
            freq.push_str(&format!("{state},{}\n", g17(frequency)));
        }
    }
    atomic_write(&out_dir.join("frequencies.csv"), &freq)?;
    Ok(Outcome::Success)
}

/// Runs the gradient-certification registry and prints one line per entry.
/// Exits nonzero when any entry misses the repository tolerance.
pub fn gradcheck() -> EbmResult<Outcome> {
    let entries = ebmlab::gradcheck::run_all();
    let mut failed = 0;
    println!("{:<34} {:>14}  status", "gradient", "max rel error");
    for e in &entries {
        let ok = e.max_rel_error < ebmlab::gradcheck::TOLERANCE;
        if !ok {
            failed += 1;
        }
        println!(
            "{:<34} {:>14.3e}  {}",
            e.name,
            e.max_rel_error,
            if ok { "ok" } else { "FAIL" }
        );
    }
    if failed > 0 {
        return Err(EbmError::invalid(
            "gradcheck",
            format!("{failed} gradient(s) exceeded {}", ebmlab::gradcheck::TOLERANCE),
        ));
    }
    Ok(Outcome::Success)
}
