# app package init
