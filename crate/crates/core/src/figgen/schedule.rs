use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use super::{
    hash_file, needs_regeneration, run_generator, CacheManifest, FigureAsset, FigureKind, GeneratorError, GeneratorRun,
    ManifestEntry, OutputRecord,
};
use crate::layout::GeneratorCommands;
use crate::{Diagnostics, Mode};

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub force: bool,
    pub parallelism: usize,
    pub mode: Mode,
    pub commands: GeneratorCommands,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            force: false,
            parallelism: thread::available_parallelism().map_or(1, |n| n.get()),
            mode: Mode::Lenient,
            commands: GeneratorCommands::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationSummary {
    pub regenerated: usize,
    pub cached: usize,
    pub failed: usize,
}

impl std::fmt::Display for GenerationSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} regenerated, {} cached, {} failed",
            self.regenerated, self.cached, self.failed
        )
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub manifest: CacheManifest,
    pub diagnostics: Diagnostics,
    pub summary: GenerationSummary,
}

type RunResult = Result<GeneratorRun, GeneratorError>;

/// Runs `job` over `items` on up to `parallelism` threads. Results keep the
/// order of `items`.
fn parallel_map<T: Sync, R: Send>(items: &[T], parallelism: usize, job: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..parallelism.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let result = job(item);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

fn entry_for(asset: &FigureAsset, run: &GeneratorRun) -> std::io::Result<ManifestEntry> {
    let mut outputs = Vec::new();
    for path in &run.outputs {
        let relative = path
            .strip_prefix(&run.working_dir)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        outputs.push(OutputRecord {
            path: relative,
            hash: hash_file(path)?,
        });
    }
    Ok(ManifestEntry {
        hash: asset.source_hash.clone(),
        mtime: asset.source_mtime,
        outputs,
    })
}

/// Regenerates every generator asset that [`needs_regeneration`] (or all of
/// them with `force`) and returns the updated manifest.
///
/// Mermaid diagrams run concurrently up to `parallelism`. Scripts then run
/// one at a time because their outputs are detected by directory snapshots.
/// A failed asset keeps its previous manifest entry and yields one defect
/// diagnostic; the others still succeed. Entries for sources that no longer
/// exist are dropped. A `FigureSummary` notice reports the counts.
pub fn generate_all(assets: &[FigureAsset], manifest: &CacheManifest, options: &GenerateOptions) -> GenerateOutcome {
    let mut manifest = manifest.clone();
    let mut diagnostics = Diagnostics::new();
    let mut summary = GenerationSummary::default();

    let generators: Vec<&FigureAsset> = assets.iter().filter(|a| a.kind.is_generator()).collect();
    let live: BTreeSet<&str> = generators.iter().map(|a| a.relative.as_str()).collect();
    manifest.entries.retain(|key, _| live.contains(key.as_str()));

    let mut due = Vec::new();
    for asset in &generators {
        if options.force || needs_regeneration(asset, &manifest) {
            due.push(*asset);
        } else {
            summary.cached += 1;
            if let Some(entry) = manifest.entries.get_mut(&asset.relative) {
                entry.mtime = asset.source_mtime;
            }
        }
    }

    let (diagrams, scripts): (Vec<&FigureAsset>, Vec<&FigureAsset>) =
        due.into_iter().partition(|a| a.kind == FigureKind::Mermaid);
    let mut results: Vec<(&FigureAsset, RunResult)> = Vec::new();
    let diagram_runs = parallel_map(&diagrams, options.parallelism, |a| run_generator(a, &options.commands));
    results.extend(diagrams.iter().copied().zip(diagram_runs));
    for asset in scripts {
        results.push((asset, run_generator(asset, &options.commands)));
    }
    results.sort_by(|a, b| a.0.relative.cmp(&b.0.relative));

    for (asset, result) in results {
        let outcome = result.and_then(|run| entry_for(asset, &run).map_err(GeneratorError::Io).map(|e| (run, e)));
        match outcome {
            Ok((run, entry)) => {
                if run.outputs.is_empty() {
                    diagnostics
                        .warning("GeneratorNoOutput", format!("{} produced no files", asset.relative))
                        .file = Some(asset.source_path.clone());
                }
                manifest.entries.insert(asset.relative.clone(), entry);
                summary.regenerated += 1;
            }
            Err(err) => {
                summary.failed += 1;
                diagnostics
                    .defect(options.mode, err.code(), format!("{}: {err}", asset.relative))
                    .file = Some(asset.source_path.clone());
            }
        }
    }

    diagnostics.notice("FigureSummary", summary.to_string());
    GenerateOutcome {
        manifest,
        diagnostics,
        summary,
    }
}
