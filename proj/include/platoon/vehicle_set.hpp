#pragma once

// Bookkeeping for the ordered vehicle set and the id reshuffle that follows a
// lane-change event. Ids are consecutive: 0 = preceding vehicle when present,
// 1 = CAV, 2..N = HDVs ordered by distance behind the CAV.

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace platoon {

class InvalidEvent : public std::runtime_error {
 public:
  explicit InvalidEvent(const std::string& msg) : std::runtime_error(msg) {}
};

struct VehicleSet {
  bool has_pv = false;
  int n_total = 2;  // N: the CAV plus its followers (excludes the PV)

  int hdv_count() const { return n_total - 1; }

  // Full id list, front to back.
  std::vector<int> ids() const;

  // Throws std::invalid_argument if the HDV set would be empty.
  void validate() const;
};

struct LaneEvent {
  enum class Kind { departure, insertion };
  Kind kind = Kind::departure;
  // Departures name the leaving HDV; insertions name the vehicle the newcomer
  // slots in behind. Id 0 and 1 are never valid references.
  int id = 0;
};

struct ReindexResult {
  VehicleSet set;
  // (old id, new id) for every surviving vehicle; an inserted vehicle appears
  // only in the new set (its id is insertion.id + 1).
  std::vector<std::pair<int, int>> id_map;
};

// Applies a lane-change event: followers behind a departure shift up by one,
// followers behind an insertion point shift down by one. Throws InvalidEvent
// for references to ids 0/1, unknown HDV ids, or removal of the last HDV.
ReindexResult reindex_after_lane_change(const VehicleSet& set, const LaneEvent& event);

}  // namespace platoon
