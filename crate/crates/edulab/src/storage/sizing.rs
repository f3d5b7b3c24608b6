//! Capacity planning for the raw store.

use super::StorageError;

/// Exact sizing for a projected student population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoragePlan {
    pub students: u64,
    pub bytes_per_student: u64,
    pub replication: u64,
    pub total_bytes: u64,
}

impl StoragePlan {
    /// Render the total with the coarse units used in capacity discussions:
    /// mebibytes below a thousand of them, decimal-thousand gigabytes above.
    pub fn human_total(&self) -> String {
        let bytes = self.total_bytes;
        if bytes < 1 << 20 {
            return format!("{bytes} B");
        }
        let mb = bytes as f64 / (1u64 << 20) as f64;
        if mb < 1000.0 {
            return format!("≈{mb:.0} MB");
        }
        let gb = mb / 1000.0;
        format!("≈{gb:.0} GB")
    }
}

/// Compute total raw-store bytes for `students` records of
/// `bytes_per_student` each, replicated `replication` times.
pub fn estimate_storage(
    students: u64,
    bytes_per_student: u64,
    replication: u64,
) -> Result<StoragePlan, StorageError> {
    if replication == 0 {
        return Err(StorageError::ZeroReplication);
    }
    let total_bytes = students
        .checked_mul(bytes_per_student)
        .and_then(|b| b.checked_mul(replication))
        .ok_or(StorageError::PlanOverflow)?;
    Ok(StoragePlan {
        students,
        bytes_per_student,
        replication,
        total_bytes,
    })
}
