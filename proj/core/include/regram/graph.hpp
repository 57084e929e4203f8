#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "regram/encoding.hpp"
#include "regram/geo.hpp"
#include "regram/records.hpp"

namespace regram {

struct GraphConfig {
  double edge_radius_m = 500.0;     // strict < for both txn edges and communities
  int max_trade_gap_days = 365;     // txn edge time window (or same calendar month)
  double max_age_gap_years = 10.0;  // strict <
  int neighbor_cap = 64;            // geographically nearest kept
  int community_window_months = 2;  // calendar months of usable community trades
  double inter_comm_fraction = 0.001;
};

using Adjacency = std::map<std::string, std::vector<std::string>>;

struct CommunityAssignment {
  std::map<std::string, std::string> community_of;           // only ids in a community
  std::map<std::string, std::vector<std::string>> members;   // community id -> sorted ids
};

struct GraphBundle {
  Adjacency txn_adjacency;  // every id present; lists sorted; symmetric; no self-loops
  CommunityAssignment communities;
  Adjacency community_adjacency;  // symmetric; no self-loops
};

// Members of one neighbor community that are usable for a given target
// (traded inside the look-back window).
struct CommunityNeighborhood {
  std::string community_id;
  std::vector<std::string> member_ids;  // sorted
};

struct NeighborContext {
  std::string target_id;
  std::vector<std::string> txn_neighbors;  // nearest-first, capped
  std::string community_id;                // empty when the target has none
  std::vector<CommunityNeighborhood> neighbor_communities;  // sorted by community id
};

// Records that may serve as history for a target, with index and id lookup.
struct HistoryView {
  const std::vector<TransactionRecord>* records = nullptr;
  const GridIndex* index = nullptr;  // over the same records
  std::unordered_map<std::string, const TransactionRecord*> by_id;

  static HistoryView over(const std::vector<TransactionRecord>& records, const GridIndex& index);
};

GridIndex make_grid_index(const std::vector<TransactionRecord>& records, double cell_m);

// True when a and b may share a transaction-level edge: closer than the edge
// radius, traded within the day window (or in the same calendar month), house
// ages differing by strictly less than the age gap, equal building type, main
// purpose and all three flags.  Symmetric; true for identical records.
bool txn_edge_predicate(const TransactionRecord& a, const TransactionRecord& b,
                        const GraphConfig& cfg = {});

Adjacency build_txn_graph(const std::vector<TransactionRecord>& records, const GridIndex& index,
                          const GraphConfig& cfg = {});

// Connected components over "same completion month and distance < radius";
// singletons get no community; a community's id is its smallest member id.
CommunityAssignment assign_communities(const std::vector<TransactionRecord>& records,
                                       const GridIndex& index, const GraphConfig& cfg = {});

// Connects the m = max(1, floor(fraction · C(C-1)/2)) community pairs with the
// smallest L2 distance between mean member PoI vectors; ties broken by id pair.
Adjacency build_inter_comm_edges(const CommunityAssignment& communities,
                                 const std::map<std::string, std::vector<double>>& poi_by_id,
                                 const GraphConfig& cfg = {});

GraphBundle build_graph_bundle(const std::vector<TransactionRecord>& records,
                               const GridIndex& index, const Normalizer& normalizer,
                               const GraphConfig& cfg = {});

// Temporal context for one target over historical records.  Works for targets
// inside the bundle and for later out-of-bundle targets (neighbors recomputed
// by predicate, community attached via the smallest same-month historical
// community within the edge radius).
NeighborContext make_neighbor_context(const TransactionRecord& target, const GraphBundle& bundle,
                                      const HistoryView& history, const GraphConfig& cfg = {});

// JSON round-trip for per-city bundles (versioned document).
std::string bundles_to_json_string(const std::map<std::string, GraphBundle>& per_city);
std::map<std::string, GraphBundle> bundles_from_json_string(const std::string& text);

}  // namespace regram
