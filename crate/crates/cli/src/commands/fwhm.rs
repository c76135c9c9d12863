use scarbench::fwhm::{threshold_segment, LabelingInputs};
use scarbench::io::{encode_mask, load_image, load_mask};

use crate::fail::{CmdResult, Failure};
use crate::output::{fmt_float, OutDir, ReportBuilder};
use crate::FwhmArgs;

pub(crate) const FWHM_FILE: &str = "fwhm_mask.pgm";

pub(crate) fn run(a: FwhmArgs) -> CmdResult<()> {
    let report = ReportBuilder::start("fwhm", 0);
    let image = load_image(&a.image).map_err(Failure::usage)?;
    let myocardium = load_mask(&a.myocardium).map_err(Failure::usage)?;
    let roi = load_mask(&a.roi).map_err(Failure::usage)?;
    let inputs = LabelingInputs::new(image, myocardium, roi).map_err(Failure::usage)?;
    let scar = threshold_segment(&inputs, a.threshold_fraction).map_err(Failure::usage)?;

    let reference = inputs.reference_intensity();
    println!(
        "reference_intensity={} threshold={} scar_px={}",
        fmt_float(reference),
        fmt_float(a.threshold_fraction * reference),
        scar.count()
    );
    let mut out = OutDir::create(&a.out_dir)?;
    out.write(FWHM_FILE, &encode_mask(&scar))?;
    let outputs = out.outputs();
    out.write_report(&report.finish(1, Vec::new(), Vec::new(), outputs))
}
