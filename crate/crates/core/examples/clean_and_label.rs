//! Cleans a small attempt log and labels every surviving attempt.
//!
//! cargo run --example clean_and_label

use pathtrace::ingest::{clean, load_logs_from_reader, order_across, renumber_attempts, ColumnMapping, ProblemMeta};
use pathtrace::labeling::{label_attempts, label_distribution};

const LOGS: &str = "\
student_id,problem_id,attempt_index,start_timestamp,step_count,time_spent,goal_reached,hints_requested,problem_kind
amy,warmup,1,1000,2,4000,true,0,tutorial
amy,p1,1,2000,2,9000,false,1,regular
amy,p1,2,3000,3,8000,true,0,regular
amy,p1,3,4000,1,0,false,0,regular
amy,p1,4,5000,1,5000,false,0,regular
amy,p2,1,6000,6,20000,true,2,regular
amy,p1,5,7000,4,7000,true,0,regular
ben,p2,1,1500,4,12000,true,0,regular
ben,p2,2,2500,5,2400000,true,0,regular
ben,p3,1,3500,2,6000,true,0,regular
ben,p2,3,4500,4,9000,true,0,regular
";

const META: &str = "problem_id,optimal_step_count\np1,3\np2,4\np3,2\nwarmup,2\n";

fn main() -> pathtrace::Result<()> {
    let logs = load_logs_from_reader(LOGS.as_bytes(), &ColumnMapping::default())?.into_strict()?;
    let meta = ProblemMeta::from_reader(META.as_bytes())?;

    let (mut kept, report) = clean(&logs.records);
    println!(
        "read {} rows, kept {} (tutorial {}, zero time {}, over 30 min {})",
        report.input_rows(),
        report.retained,
        report.removed_tutorial,
        report.removed_zero_time,
        report.removed_over_cap
    );
    // removed rows leave gaps in attempt numbering
    renumber_attempts(&mut kept)?;

    let labeled = label_attempts(&order_across(&kept)?, &meta)?;
    println!("\n{:<8}{:<8}{:>8}  {:<24}replay", "student", "problem", "attempt", "label");
    for a in &labeled {
        let r = &a.record;
        println!(
            "{:<8}{:<8}{:>8}  {:<24}{}",
            r.student_id,
            r.problem_id,
            r.attempt_index,
            a.label,
            a.replay_category
        );
    }

    println!("\nlabel distribution:");
    for (label, (n, pct)) in label_distribution(&labeled) {
        println!("  {label:<24}{n:>3}  {pct:5.1}%");
    }
    Ok(())
}
