use super::{Config, HarnessError};
use crate::fem::{self, DisplacementField, LoadCase, SolveReport};
use crate::geometry::{Mesh, Microstructure, PackingOptions};
use crate::imaging::{render_deformed, Grid, Image, Roi, SpecklePattern};
use crate::par::Execution;
use crate::Rect;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Files written by [`Dataset::save`], relative to the dataset directory.
pub const DATASET_FILES: [&str; 12] = [
    "config.toml",
    "microstructure.json",
    "dns_mesh.txt",
    "mve_mesh.txt",
    "u_tension.txt",
    "u_shear.txt",
    "f.raw",
    "g_tension.raw",
    "g_shear.raw",
    "f.pgm",
    "g_tension.pgm",
    "g_shear.pgm",
];

/// Specimen solution and clean deformed image of one load case.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub case: LoadCase,
    pub u_dns: DisplacementField,
    pub g: Image,
}

/// Virtual specimen: microstructure, meshes, reference solutions and clean
/// images for both load cases.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: Config,
    pub micro: Microstructure,
    pub dns_mesh: Arc<Mesh>,
    pub mve_mesh: Arc<Mesh>,
    pub f: Image,
    pub cases: Vec<CaseData>,
}

impl Dataset {
    /// Builds the specimen and solves both load cases with the reference
    /// moduli.
    pub fn prepare(config: &Config, exec: Execution) -> Result<Dataset, HarnessError> {
        config.validate()?;
        let g = &config.geometry;
        let micro = Microstructure::generate(
            g.domain,
            g.inclusions,
            g.diameter,
            g.min_gap,
            crate::seed::derive(config.seed, "microstructure", 0),
            PackingOptions {
                max_attempts: g.max_attempts,
            },
        )?;
        let dns_mesh = Arc::new(Mesh::generate(&micro, g.dns_edge)?);
        let mve_mesh = Arc::new(Mesh::extract_mve(&micro, &dns_mesh, g.mve_window(), g.mve_edge)?);
        let grid = fov_grid(config)?;
        let mut spec = config.imaging.speckle.clone();
        spec.seed = crate::seed::derive(config.seed, "speckle", spec.seed);
        let pattern = SpecklePattern::new(&spec, &grid)?;
        let f = pattern.render(&grid, exec);
        let mat = config.material.params();
        let mut cases = Vec::new();
        for case in [LoadCase::Tension, LoadCase::Shear] {
            let (u_dns, _): (DisplacementField, SolveReport) =
                fem::solve_dns(dns_mesh.clone(), &mat, case, &config.solver)?;
            let g_img = render_deformed(&pattern, &grid, &u_dns, exec)?;
            cases.push(CaseData { case, u_dns, g: g_img });
        }
        Ok(Dataset {
            config: config.clone(),
            micro,
            dns_mesh,
            mve_mesh,
            f,
            cases,
        })
    }

    pub fn case(&self, case: LoadCase) -> &CaseData {
        self.cases.iter().find(|c| c.case == case).expect("both load cases are prepared")
    }

    pub fn grid(&self) -> &Grid {
        self.f.grid()
    }

    /// Correlation window: pixels whose centres lie in the MVE.
    pub fn roi(&self) -> Roi {
        Roi::from_rect(*self.grid(), self.mve_mesh.bounds())
    }

    /// Writes every file of [`DATASET_FILES`] and returns their paths.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut create = |name: &str| -> Result<BufWriter<File>, HarnessError> {
            let p = dir.join(name);
            written.push(p.clone());
            Ok(BufWriter::new(File::create(p)?))
        };
        create("config.toml")?.write_all(self.config.to_toml().as_bytes())?;
        let mut w = create("microstructure.json")?;
        serde_json::to_writer_pretty(&mut w, &self.micro)?;
        writeln!(w)?;
        self.dns_mesh.write_text(create("dns_mesh.txt")?)?;
        self.mve_mesh.write_text(create("mve_mesh.txt")?)?;
        for c in &self.cases {
            c.u_dns.write_text(create(&format!("u_{}.txt", c.case.name()))?)?;
        }
        self.f.write_raw(create("f.raw")?)?;
        for c in &self.cases {
            c.g.write_raw(create(&format!("g_{}.raw", c.case.name()))?)?;
        }
        self.f.write_pgm(create("f.pgm")?)?;
        for c in &self.cases {
            c.g.write_pgm(create(&format!("g_{}.pgm", c.case.name()))?)?;
        }
        Ok(written)
    }

    /// Reads a dataset written by [`Dataset::save`]. The stored config is
    /// authoritative for the specimen.
    pub fn load(dir: &Path) -> Result<Dataset, HarnessError> {
        let open = |name: &str| -> Result<BufReader<File>, HarnessError> {
            let p = dir.join(name);
            File::open(&p)
                .map(BufReader::new)
                .map_err(|e| HarnessError::Dataset(format!("{}: {e}", p.display())))
        };
        let text = std::fs::read_to_string(dir.join("config.toml"))
            .map_err(|e| HarnessError::Dataset(format!("{}: {e}", dir.join("config.toml").display())))?;
        let config = Config::from_toml(&text)?;
        let micro: Microstructure = serde_json::from_reader(open("microstructure.json")?)?;
        let dns_mesh = Arc::new(Mesh::read_text(open("dns_mesh.txt")?)?);
        let mve_mesh = Arc::new(Mesh::read_text(open("mve_mesh.txt")?)?);
        let grid = fov_grid(&config)?;
        let f = Image::read_raw(open("f.raw")?, grid.pixel_size, grid.origin)?;
        let mut cases = Vec::new();
        for case in [LoadCase::Tension, LoadCase::Shear] {
            let u_dns = DisplacementField::read_text(dns_mesh.clone(), open(&format!("u_{}.txt", case.name()))?)?;
            let g = Image::read_raw(open(&format!("g_{}.raw", case.name()))?, grid.pixel_size, grid.origin)?;
            f.check_same_grid(&g)?;
            cases.push(CaseData { case, u_dns, g });
        }
        if f.grid() != &grid {
            return Err(HarnessError::Dataset("image size does not match the stored config".into()));
        }
        Ok(Dataset {
            config,
            micro,
            dns_mesh,
            mve_mesh,
            f,
            cases,
        })
    }
}

/// Square field of view centred on the MVE.
pub(crate) fn fov_grid(config: &Config) -> Result<Grid, HarnessError> {
    let c = config.geometry.mve_window().center();
    let s = config.imaging.fov_size;
    Ok(Grid::covering(Rect::centered(c, s, s), config.imaging.fov_pixels)?)
}
