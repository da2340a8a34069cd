#include <stdio.h>
#include <string.h>
#include "eal.h"

int main(void) {
    EalProgram *p = NULL;
    const char *src = "region r : 0 of !((1 -o 1) -o 1);\n"
                      "(let !x = get(r) in set(r, !x)) | r <= !(\\(x : 1 -o 1). x *)";
    if (eal_program_parse(src, &p) != EAL_STATUS_OK) return 1;
    uint32_t depth = 0;
    if (eal_program_check_depth(p, 0, &depth) != EAL_STATUS_OK || depth != 1) return 2;
    size_t steps = 0;
    char *final_state = NULL;
    if (eal_program_run(p, EAL_SCHEDULE_DETERMINISTIC, 0, 100, &steps, &final_state) != EAL_STATUS_OK) return 3;
    printf("%zu %s\n", steps, final_state);
    eal_string_free(final_state);
    eal_program_free(p);
    if (eal_program_parse("(", &p) != EAL_STATUS_SYNTAX || strlen(eal_last_error()) == 0) return 4;
    return steps == 2 ? 0 : 5;
}
