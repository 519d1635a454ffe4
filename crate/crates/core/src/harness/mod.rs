//! Scenario files, Monte-Carlo campaigns, exact oracles and report files.

mod campaign;
mod config;
mod oracle;
mod report;

pub use campaign::{run_campaign, run_campaign_on, Campaign, CampaignResult, MetricRow, Summary, Task};
pub use config::{load_scenario_file, parse_scenario, parse_scenario_str, DistributedSettings, ScenarioFile};
pub use oracle::{brute_force_wsr, BRUTE_FORCE_LIMIT};
pub use report::{emit_report, write_atomic, ReportPaths};
