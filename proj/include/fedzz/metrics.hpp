#pragma once

#include <filesystem>
#include <vector>

#include <fedzz/sim.hpp>

namespace fedzz {

// One discarded update, tagged with ground truth about its sender.
struct DropEvent {
  int epoch = 0;  // 1-based, matching RoundReport numbering
  int client_id = 0;
  bool was_malicious = false;
};

struct DropLog {
  std::vector<DropEvent> events;
  int total_epochs = 0;
  int malicious_count = 0;  // distinct malicious clients in the run
};

DropLog build_drop_log(const std::vector<RoundReport>& reports,
                       const std::vector<int>& malicious_ids);

// Percentage of the malicious updates that were actually dropped: a client
// is droppable once per epoch, so the denominator is malicious_count times
// total_epochs. Undefined (throws) without malicious clients.
double detection_rate(const DropLog& log);

// Percentage of all drops that hit benign clients; 0 when nothing was
// dropped.
double avg_false_positive_rate(const DropLog& log);

// Complement of the false-positive rate, so the two always sum to exactly
// 100 when drops exist (and to 0 otherwise).
double malicious_drop_fraction(const DropLog& log);

// The benign-drop ratio scaled by 2 * total_epochs instead of 100. Not a
// percentage; emitted alongside the plain ratio for comparability.
double afpr_scaled(const DropLog& log);

// Writes metrics.csv (one row per epoch), drops.csv (one row per drop
// event), and summary.json (final GTA, rates, config echo) into out_dir,
// creating it if needed. Identical runs produce byte-identical files.
void emit_reports(const std::vector<RoundReport>& reports, const DropLog& log,
                  const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace fedzz
