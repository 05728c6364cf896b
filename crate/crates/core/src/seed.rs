//! Bundled expert presets: the three reference experts this gateway ships
//! with, each described in its own product blurb. `medagi seed` and the test
//! suites install these.

use chrono::{DateTime, Utc};

use crate::registry::ExpertDescriptor;

const SKINGPT4_DESCRIPTION: &str = "SkinGPT is a revolutionary dermatology diagnostic system that utilizes an advanced vision-based large language model to assess skin conditions. By uploading personal skin photos to the system, users receive an autonomous analysis that can identify and categorize various skin conditions, and provide treatment recommendations.";

const XRAYCHAT_DESCRIPTION: &str = "XrayChat is a cutting-edge system that enables interactive, multi-turn conversations about chest X-ray images. Users simply upload a chest X-ray image, ask any question about it, and XrayChat generates informed responses. The system utilizes an X-ray encoder, a large language model, and an adaptor to comprehend the X-ray image and produce accurate and helpful answers.";

const PATHOLOGYCHAT_DESCRIPTION: &str = "PathologyChat is a cutting-edge system that enables interactive, multi-round conversations about stained pathology images. Users simply upload a pathology image, ask any question about it, and PathologyChat generates informed responses.";

/// Fixed creation time so seeding is deterministic.
fn seed_time() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z")
        .expect("valid timestamp")
        .with_timezone(&Utc)
}

/// The three bundled experts, in registration order.
pub fn seed_descriptors() -> Vec<ExpertDescriptor> {
    let mut skingpt4 = ExpertDescriptor::new(
        "skingpt4",
        "SkinGPT-4",
        SKINGPT4_DESCRIPTION,
        "skingpt4_align",
    );
    skingpt4.tags = vec!["dermatology".into()];
    skingpt4.created_at = seed_time();

    let mut xraychat = ExpertDescriptor::new(
        "xraychat",
        "XrayChat",
        XRAYCHAT_DESCRIPTION,
        "xraychat_align",
    );
    xraychat.tags = vec!["radiology".into()];
    xraychat.created_at = seed_time();

    let mut pathologychat = ExpertDescriptor::new(
        "pathologychat",
        "PathologyChat",
        PATHOLOGYCHAT_DESCRIPTION,
        "pathologychat_align",
    );
    pathologychat.tags = vec!["pathology".into()];
    pathologychat.created_at = seed_time();

    vec![skingpt4, xraychat, pathologychat]
}
