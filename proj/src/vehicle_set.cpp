#include "platoon/vehicle_set.hpp"

namespace platoon {

std::vector<int> VehicleSet::ids() const {
  std::vector<int> out;
  if (has_pv) out.push_back(0);
  for (int i = 1; i <= n_total; ++i) out.push_back(i);
  return out;
}

void VehicleSet::validate() const {
  if (n_total < 2)
    throw std::invalid_argument("vehicle set: at least one HDV must follow the CAV");
}

ReindexResult reindex_after_lane_change(const VehicleSet& set, const LaneEvent& event) {
  set.validate();
  if (event.id <= 1)
    throw InvalidEvent("lane event may not reference vehicle id " + std::to_string(event.id) +
                       " (preceding vehicle and CAV never change lanes here)");
  if (event.id > set.n_total)
    throw InvalidEvent("lane event references id " + std::to_string(event.id) +
                       " but the set ends at id " + std::to_string(set.n_total));

  ReindexResult out;
  out.set = set;
  if (set.has_pv) out.id_map.emplace_back(0, 0);
  out.id_map.emplace_back(1, 1);

  if (event.kind == LaneEvent::Kind::departure) {
    if (set.hdv_count() == 1)
      throw InvalidEvent("departure of the only HDV would leave the CAV without followers");
    out.set.n_total = set.n_total - 1;
    for (int id = 2; id <= set.n_total; ++id) {
      if (id == event.id) continue;
      out.id_map.emplace_back(id, id < event.id ? id : id - 1);
    }
  } else {
    out.set.n_total = set.n_total + 1;
    for (int id = 2; id <= set.n_total; ++id)
      out.id_map.emplace_back(id, id <= event.id ? id : id + 1);
  }
  return out;
}

}  // namespace platoon
