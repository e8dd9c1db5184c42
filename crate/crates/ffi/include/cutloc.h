#ifndef CUTLOC_H
#define CUTLOC_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum CutlocStatus {
  CUTLOC_STATUS_OK = 0,
  CUTLOC_STATUS_NULL_ARGUMENT = 1,
  CUTLOC_STATUS_INVALID_UTF8 = 2,
  CUTLOC_STATUS_IO = 3,
  CUTLOC_STATUS_PARSE = 4,
  CUTLOC_STATUS_INVALID_GRAPH = 5,
  CUTLOC_STATUS_INVALID_ANOMALY = 6,
  CUTLOC_STATUS_VERDICT_REJECTED = 7,
  CUTLOC_STATUS_SESSION_FINISHED = 8,
  CUTLOC_STATUS_SESSION_RUNNING = 9,
  CUTLOC_STATUS_LOCALIZE_FAILED = 10,
  CUTLOC_STATUS_PANIC = 255,
} CutlocStatus;

// A validated execution graph.
typedef struct CutlocGraph CutlocGraph;

// An interactive localization session.
typedef struct CutlocSession CutlocSession;

// Parses graph file text (one JSON object per line).
//
// # Safety
// `text` must be a valid C string and `out` a valid pointer.
enum CutlocStatus cutloc_graph_from_jsonl(const char *text, struct CutlocGraph **out);

// Loads a graph file from `path`.
//
// # Safety
// `path` must be a valid C string and `out` a valid pointer.
enum CutlocStatus cutloc_graph_load(const char *path, struct CutlocGraph **out);

// # Safety
// `graph` must be null or a handle from this library not yet freed.
void cutloc_graph_free(struct CutlocGraph *graph);

// Number of vertices, or 0 for a null handle.
//
// # Safety
// `graph` must be null or a live handle.
size_t cutloc_graph_vertex_count(const struct CutlocGraph *graph);

// Number of edges, or 0 for a null handle.
//
// # Safety
// `graph` must be null or a live handle.
size_t cutloc_graph_edge_count(const struct CutlocGraph *graph);

// Starts a session. `anomaly` is `edge:<src,dst,kind[,var]>` or
// `global:<ids>:<predicate ids>`; `predicates` is predicate file text or
// null. The session keeps its own reference to the graph.
//
// # Safety
// `graph` must be a live handle, the strings valid C strings (or null for
// `predicates`) and `out` a valid pointer.
enum CutlocStatus cutloc_session_start(const struct CutlocGraph *graph,
                                       const char *anomaly,
                                       const char *predicates,
                                       struct CutlocSession **out);

// # Safety
// `session` must be null or a handle from this library not yet freed.
void cutloc_session_free(struct CutlocSession *session);

// True once the session has a result; false for a null handle.
//
// # Safety
// `session` must be null or a live handle.
bool cutloc_session_is_finished(const struct CutlocSession *session);

// The pending examination as JSON: `{cut, atoms, progress}`.
//
// # Safety
// `session` must be a live handle and `out` a valid pointer.
enum CutlocStatus cutloc_session_query_json(const struct CutlocSession *session, char **out);

// Answers the pending examination with `{"per_edge": {...}, "global": ...}`.
// A rejected answer leaves the session unchanged.
//
// # Safety
// `session` must be a live handle and `verdict` a valid C string.
enum CutlocStatus cutloc_session_answer_json(struct CutlocSession *session, const char *verdict);

// The result and transcript as JSON: `{"result": ..., "transcript": [...]}`.
//
// # Safety
// `session` must be a live handle and `out` a valid pointer.
enum CutlocStatus cutloc_session_result_json(const struct CutlocSession *session, char **out);

// Runs a whole localization of `graph` against the golden run `golden` and
// returns the transcript JSONL (one examination per line, then the result).
//
// # Safety
// Both handles must be live, `anomaly` a valid C string and `out` a valid
// pointer.
enum CutlocStatus cutloc_localize_diff(const struct CutlocGraph *graph,
                                       const struct CutlocGraph *golden,
                                       const char *anomaly,
                                       char **out);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void cutloc_string_free(char *s);

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *cutloc_last_error_message(void);

// Library version, a static string.
const char *cutloc_version(void);

#endif  /* CUTLOC_H */
