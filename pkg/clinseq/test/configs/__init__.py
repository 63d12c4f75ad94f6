# -* encoding: utf-8 *-
